"""Regenerate the Lloyd-Max distortion table embedded in hwlsfp.hardware."""

from hwlsfp.hardware import MAX_BITS, lloyd_max_design

if __name__ == "__main__":
    print("DISTORTION_TABLE = {")
    for b in range(1, MAX_BITS + 1):
        _, _, rho = lloyd_max_design(b, tol=1e-12, max_iter=20000)
        print(f"    {b}: {rho!r},", flush=True)
    print("}")
