"""Wall time of each check suite, best of three."""
import time

from cousinforge import suites


def main():
    for name, fn in suites.SUITES.items():
        best = min(_once(fn) for _ in range(3))
        print(f"{name:14s} {best:7.3f}s")


def _once(fn):
    t = time.perf_counter()
    fn()
    return time.perf_counter() - t


if __name__ == "__main__":
    main()
