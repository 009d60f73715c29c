"""Desk-scale circuits under test, synthesized straight into 2-input NANDs.

``sorter`` is the combinational module (odd-even transposition network of
compare-exchange cells); ``macc`` is the sequential one (multiply-accumulate
datapath with a flip-flop accumulator, the inner loop of an IDCT).
"""

from __future__ import annotations

from .core import Netlist


class _Builder:
    def __init__(self, name: str):
        self.name = name
        self.inputs: list[str] = []
        self.outputs: list[str] = []
        self.gates: list[tuple[str, str, str]] = []
        self.dffs: list[tuple[str, str, int]] = []
        self.alias: dict[str, str] = {}
        self._count = 0

    def input(self, net: str) -> str:
        self.inputs.append(net)
        return net

    def nand(self, a: str, b: str) -> str:
        self._count += 1
        out = f"n{self._count}"
        self.gates.append((out, a, b))
        return out

    def inv(self, a):
        return self.nand(a, a)

    def and2(self, a, b):
        return self.inv(self.nand(a, b))

    def mux(self, sel, nsel, hi, lo):
        """``hi`` when sel=1 else ``lo``; caller supplies the shared inverted select."""
        return self.nand(self.nand(sel, hi), self.nand(nsel, lo))

    def maj(self, x, y, z):
        t1, t2, t3 = self.nand(x, y), self.nand(x, z), self.nand(y, z)
        return self.nand(self.and2(t1, t2), t3)

    def half_add(self, a, b):
        n1 = self.nand(a, b)
        s = self.nand(self.nand(a, n1), self.nand(b, n1))
        return s, self.inv(n1)

    def full_add(self, a, b, c):
        n1 = self.nand(a, b)
        s1 = self.nand(self.nand(a, n1), self.nand(b, n1))
        n4 = self.nand(s1, c)
        s = self.nand(self.nand(s1, n4), self.nand(c, n4))
        return s, self.nand(n1, n4)

    def add(self, xs: list[str], ys: list[str]) -> list[str]:
        """Ripple-carry sum of equal-width words, truncated to that width."""
        out, carry = [], None
        for x, y in zip(xs, ys):
            if carry is None:
                s, carry = self.half_add(x, y)
            else:
                s, carry = self.full_add(x, y, carry)
            out.append(s)
        return out

    def build(self, **extra) -> Netlist:
        # drop logic that cannot reach an output (unused carries etc.)
        rename = lambda net: self.alias.get(net, net)
        gates = [(rename(o), rename(a), rename(b)) for o, a, b in self.gates]
        dffs = [(rename(q), rename(d), i) for q, d, i in self.dffs]
        driver = {g[0]: g for g in gates}
        reg = {q: (q, d, i) for q, d, i in dffs}
        live, stack = set(), list(self.outputs)
        while stack:
            net = stack.pop()
            if net in live:
                continue
            live.add(net)
            if net in driver:
                stack.extend(driver[net][1:])
            elif net in reg:
                stack.append(reg[net][1])
        return Netlist(
            self.name,
            self.inputs,
            self.outputs,
            [g for g in gates if g[0] in live],
            [r for r in dffs if r[0] in live],
            **extra,
        )


def _compare_exchange(b: _Builder, x: list[str], y: list[str]) -> tuple[list[str], list[str]]:
    # x > y, LSB first: gt_i = MAJ(x_i, ~y_i, gt_{i-1})
    gt = b.and2(x[0], b.inv(y[0]))
    for xi, yi in zip(x[1:], y[1:]):
        gt = b.maj(xi, b.inv(yi), gt)
    ngt = b.inv(gt)
    lo = [b.mux(gt, ngt, yi, xi) for xi, yi in zip(x, y)]
    hi = [b.mux(gt, ngt, xi, yi) for xi, yi in zip(x, y)]
    return lo, hi


def sorter(n: int = 4, w: int = 4) -> Netlist:
    """Ascending sorter of ``n`` unsigned ``w``-bit words.

    Inputs ``x<i>_<bit>`` and outputs ``y<i>_<bit>`` are LSB first; ``y0`` is the minimum.
    """
    if not (2 <= n <= 8 and 1 <= w <= 8):
        raise ValueError(f"sorter needs 2 <= n <= 8 and 1 <= w <= 8, got n={n}, w={w}")
    b = _Builder(f"sorter_n{n}_w{w}")
    words = [[b.input(f"x{i}_{k}") for k in range(w)] for i in range(n)]
    for rnd in range(n):
        for i in range(rnd % 2, n - 1, 2):
            words[i], words[i + 1] = _compare_exchange(b, words[i], words[i + 1])
    for i, word in enumerate(words):
        for k, net in enumerate(word):
            name = f"y{i}_{k}"
            b.alias[net] = name
            b.outputs.append(name)
    return b.build()


def macc(w: int = 4, k: int = 8) -> Netlist:
    """Accumulator ``acc <- acc + a*b (mod 2**w)``; outputs show the updated sum each cycle.

    ``k`` is the number of accumulated terms, i.e. the stimulus length of a pattern.
    """
    if not (1 <= w <= 8 and 1 <= k <= 16):
        raise ValueError(f"macc needs 1 <= w <= 8 and 1 <= k <= 16, got w={w}, k={k}")
    bld = _Builder(f"macc_w{w}_k{k}")
    a = [bld.input(f"a{i}") for i in range(w)]
    bb = [bld.input(f"b{i}") for i in range(w)]
    acc = [f"acc{i}" for i in range(w)]

    prod = [bld.and2(a[i], bb[0]) for i in range(w)]
    for j in range(1, w):
        row = [bld.and2(a[i - j], bb[j]) for i in range(j, w)]
        prod = prod[:j] + bld.add(prod[j:], row)
    total = bld.add(acc, prod)
    for i, net in enumerate(total):
        bld.alias[net] = f"s{i}"
        bld.outputs.append(f"s{i}")
        bld.dffs.append((acc[i], f"s{i}", 0))
    return bld.build(stimulus_cycles=k)


def build_example(kind: str, **params) -> Netlist:
    if kind == "sorter":
        return sorter(**params)
    if kind == "macc":
        return macc(**params)
    raise ValueError(f"unknown example circuit {kind!r} (expected 'sorter' or 'macc')")
