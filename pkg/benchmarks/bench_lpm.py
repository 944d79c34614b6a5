"""Compare the compiled and pure-Python longest-prefix-match kernels.

    python3 benchmarks/bench_lpm.py [--prefixes N] [--lookups N] [--repeat N]

Builds one trie from random prefixes, then times ``lookup_many`` over the
same random addresses with every available kernel and checks they agree.
"""
from __future__ import annotations

import argparse
import random
import timeit
from ipaddress import IPv4Network

from ixtrace.lpm import PrefixTrie, available_backends


def random_table(rng: random.Random, n: int) -> list[tuple[IPv4Network, int]]:
    table = {}
    while len(table) < n:
        length = rng.randint(8, 28)
        addr = rng.getrandbits(32) >> (32 - length) << (32 - length)
        table[IPv4Network((addr, length))] = len(table)
    return list(table.items())


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--prefixes", type=int, default=100_000)
    ap.add_argument("--lookups", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args(argv)

    rng = random.Random(args.seed)
    trie = PrefixTrie(random_table(rng, args.prefixes))
    addrs = [rng.getrandbits(32) for _ in range(args.lookups)]
    print(f"trie: {args.prefixes} prefixes, {trie.node_count} nodes; {args.lookups} lookups, best of {args.repeat}")

    timings, answers = {}, {}
    for name, kernel in sorted(available_backends().items()):
        t = trie.with_kernel(kernel)
        answers[name] = t.lookup_many(addrs)
        timings[name] = min(timeit.repeat(lambda: t.lookup_many(addrs), number=1, repeat=args.repeat))
        rate = args.lookups / timings[name] / 1e6
        print(f"  {name:<7} {timings[name] * 1e3:9.1f} ms   {rate:6.2f} M lookups/s")
    if len(set(map(tuple, answers.values()))) != 1:
        raise SystemExit("kernels disagree")
    if {"cython", "python"} <= timings.keys():
        print(f"  speedup cython/python: {timings['python'] / timings['cython']:.1f}x")


if __name__ == "__main__":
    main()
