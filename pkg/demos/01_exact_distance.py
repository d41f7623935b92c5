"""How far is a stream of pairs from independent?

Builds exact frequency tables for a few small streams, computes the
statistical distance between the joint distribution and the product of
the margins, and shows that the independence tensor's L1 norm carries
exactly the same information.

Run:  python demos/01_exact_distance.py
"""

from fractions import Fraction

from indisketch import (
    TupleStream,
    build_frequency_table,
    dense_independence_tensor,
    distance_from_tensor_norm,
    exact_statistical_distance,
    independence_tensor_entry,
    l1_norm,
)

print("=== perfectly correlated pairs ===")
stream = [(1, 1), (2, 2)] * 3
table = build_frequency_table(TupleStream(2, 2, stream))
print(f"stream: {stream}")
print(f"m = {table.m}, joint counts = {table.joint}")
dist = exact_statistical_distance(table)
print(f"statistical distance = {dist} = {float(dist)}")

print()
print("=== the same distance through the independence tensor ===")
M = dense_independence_tensor(table)
print("tensor entries (m^(k-1)*f_i - f_1(i_1)*f_2(i_2)):")
print(M.array)
norm = l1_norm(M)
print(f"L1 norm = {norm}, norm / (2*m^k) = {distance_from_tensor_norm(norm, table.m, 2)}")
assert distance_from_tensor_norm(norm, table.m, 2) == dist

print()
print("=== an independent stream gives a zero tensor ===")
stream = [(a, b) for a in (1, 2) for b in (1, 2)] * 4
table = build_frequency_table(TupleStream(2, 2, stream))
print(f"uniform product stream, m = {table.m}")
print(f"distance = {exact_statistical_distance(table)}")
for i in ((1, 1), (1, 2), (2, 1), (2, 2)):
    assert independence_tensor_entry(table, i) == 0
print("every tensor entry is exactly 0")

print()
print("=== something in between ===")
stream = [(1, 1)] * 5 + [(1, 2)] * 2 + [(2, 1)] * 2 + [(2, 2)] * 5
table = build_frequency_table(TupleStream(2, 2, stream))
dist = exact_statistical_distance(table)
print(f"mixed stream, m = {table.m}: distance = {dist} ~ {float(dist):.4f}")
assert isinstance(dist, Fraction) and 0 < dist < Fraction(1, 2)
