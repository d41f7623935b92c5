"""The four tensor operators behind the streaming estimators.

Hyperplane slicing, absolute-hyperplane vectors, suffix summation and
prefix-zero masking, plus the composition identities that let the
dimension-reduction recursion treat a collapsed masked tensor like any
other implicit tensor.

Run:  python demos/02_tensor_operators.py
"""

import numpy as np

from indisketch import (
    DenseTensor,
    absolute_vector,
    hyperplane,
    is_significant,
    l1_norm,
    prefix_zero,
    suffix_sum,
)

M = DenseTensor(np.array([[3, -1], [-1, 3]], dtype=np.int64))
print("tensor M:")
print(M.array)

print()
print(f"hyperplane(M, 1) = {hyperplane(M, 1).array}   (row 1)")
print(f"absolute_vector(M) = {absolute_vector(M).array}   (row L1 norms)")
print(f"l1_norm preserved: {l1_norm(absolute_vector(M))} == {l1_norm(M)}")

print()
print("suffix_sum collapses leading coordinates by *signed* summation:")
print(f"suffix_sum(M, 1) = {suffix_sum(M, 1).array}   (column sums)")
print(f"suffix_sum(M, 2) = {int(suffix_sum(M, 2).array)}   (grand total)")

print()
print("prefix_zero masks rows through a 0/1 hash (indirect sampling):")
masked = prefix_zero(M, [[0, 1]])
print(masked.array)

print()
print("composition identities (exact, integer arithmetic):")
rng = np.random.default_rng(0)
A = DenseTensor(rng.integers(-9, 10, size=(3, 3, 3)))
H = rng.integers(0, 2, size=3)
G = rng.integers(0, 2, size=3)
ones = np.ones(3, dtype=np.int64)

lhs = prefix_zero(suffix_sum(A, 1), [H])
rhs = suffix_sum(prefix_zero(A, [ones, H]), 1)
print(f"mask-after-collapse == collapse-padded-mask: {lhs == rhs}")

lhs = suffix_sum(suffix_sum(A, 1), 1)
rhs = suffix_sum(A, 2)
print(f"collapse composes: {lhs == rhs}")

lhs = prefix_zero(A, [H * G])
rhs = prefix_zero(prefix_zero(A, [H]), [G])
print(f"mask products compose: {lhs == rhs}")

print()
print("a dominant hyperplane survives the signed collapse:")
B = np.ones((4, 4), dtype=np.int64)
B[2] = 500
B = DenseTensor(B)
print(f"hyperplane 3 significant at 0.9: {is_significant(B, 3, 0.9)}")
target = l1_norm(hyperplane(B, 3))
got = l1_norm(suffix_sum(B, 1))
print(f"|suffix_sum(B, 1)| = {got} vs |hyperplane| = {target} (within a few percent)")
