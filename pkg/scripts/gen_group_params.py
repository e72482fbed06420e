"""Regenerate the frozen 2048-bit group preset.

Finds q (256-bit prime) and p = q*c + 1 (2048-bit prime) from a fixed seed,
then g = h^((p-1)/q) of order q. Output is pasted into clusterauth/groups.py.
Run: python scripts/gen_group_params.py
"""
import random

import gmpy2

SEED = 20250809


def main():
    rng = random.Random(SEED)
    q = gmpy2.next_prime(rng.getrandbits(256) | (1 << 255))
    while True:
        c = rng.getrandbits(2048 - 256)
        p = q * c + 1
        if p.bit_length() != 2048:
            continue
        if gmpy2.is_prime(p):
            break
    cofactor = (p - 1) // q
    for h in range(2, 100):
        g = gmpy2.powmod(h, cofactor, p)
        if g != 1:
            break
    assert gmpy2.powmod(g, q, p) == 1
    print(f"# seed {SEED}")
    print(f'_FULL_P = int(\n    "{p:x}", 16\n)')
    print(f'_FULL_Q = int("{q:x}", 16)')
    print(f'_FULL_G = int(\n    "{g:x}", 16\n)')


if __name__ == "__main__":
    main()
