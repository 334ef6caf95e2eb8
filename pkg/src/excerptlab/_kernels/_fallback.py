"""Pure-Python/numpy versions of the hot kernels.

Semantics are identical to the compiled module ``_ckernels``; the test-suite
checks both against each other byte for byte.
"""

from __future__ import annotations

import numpy as np

LZW_MIN_WIDTH = 9
LZW_MAX_WIDTH = 16
LZW_MAX_ENTRIES = 1 << LZW_MAX_WIDTH


def lzw_code_width(index: int) -> int:
    """Bit width of the ``index``-th emitted code (0-based).

    Before emitting code ``index`` the encoder dictionary holds
    ``256 + index`` entries (capped), and the code must address all of them.
    The decoder derives the same width from the code index alone.
    """
    size = min(256 + index, LZW_MAX_ENTRIES)
    return max(LZW_MIN_WIDTH, (size - 1).bit_length())


def lzw_encode(data: bytes) -> bytes:
    data = bytes(data)
    if not data:
        return b""
    table: dict[tuple[int, int], int] = {}
    next_code = 256
    out = bytearray()
    acc = 0
    nbits = 0
    index = 0

    def emit(code: int) -> None:
        nonlocal acc, nbits, index
        width = lzw_code_width(index)
        index += 1
        acc = (acc << width) | code
        nbits += width
        while nbits >= 8:
            nbits -= 8
            out.append((acc >> nbits) & 0xFF)
        acc &= (1 << nbits) - 1

    prefix = data[0]
    for byte in data[1:]:
        key = (prefix, byte)
        code = table.get(key)
        if code is not None:
            prefix = code
            continue
        emit(prefix)
        if next_code < LZW_MAX_ENTRIES:
            table[key] = next_code
            next_code += 1
        prefix = byte
    emit(prefix)
    if nbits:
        out.append((acc << (8 - nbits)) & 0xFF)
    return bytes(out)


def lzw_decode(data: bytes) -> bytes:
    data = bytes(data)
    total_bits = 8 * len(data)
    entries: list[bytes] = [bytes([i]) for i in range(256)]
    out = bytearray()
    pos = 0
    index = 0
    previous: bytes | None = None
    as_int = int.from_bytes(data, "big") if data else 0
    while True:
        width = lzw_code_width(index)
        if total_bits - pos < width:
            break
        code = (as_int >> (total_bits - pos - width)) & ((1 << width) - 1)
        pos += width
        index += 1
        if code < len(entries):
            entry = entries[code]
        elif previous is not None and code == len(entries):
            entry = previous + previous[:1]
        else:
            raise ValueError(f"invalid LZW code {code} at code index {index - 1}")
        out += entry
        if previous is not None and len(entries) < LZW_MAX_ENTRIES:
            entries.append(previous + entry[:1])
        previous = entry
    return bytes(out)


def rle_binary_encode(data: bytes) -> bytes:
    data = bytes(data)
    out = bytearray()
    n = len(data)
    i = 0
    while i < n:
        value = data[i]
        j = i + 1
        while j < n and data[j] == value and j - i < 255:
            j += 1
        out.append(j - i)
        out.append(value)
        i = j
    return bytes(out)


def rle_binary_decode(data: bytes) -> bytes:
    data = bytes(data)
    if len(data) % 2:
        raise ValueError("binary RLE stream must hold (count, value) pairs")
    out = bytearray()
    for k in range(0, len(data), 2):
        count = data[k]
        if count == 0:
            raise ValueError(f"zero run count at offset {k}")
        out += bytes([data[k + 1]]) * count
    return bytes(out)


def simplex_lsq(
    xt: np.ndarray,
    b: np.ndarray,
    eta: float,
    w0: np.ndarray,
    tol: float,
    max_iter: int,
    record: bool = False,
):
    """Pairwise Frank-Wolfe for ``min ||xt.T @ w - b||^2 + eta ||w||^2`` on the simplex.

    ``xt`` has one row per weight. Returns ``(w, gap, iterations, trace)``
    where ``trace`` is the objective after every iteration when ``record`` is
    set (otherwise an empty array). Convergence means the Frank-Wolfe duality
    gap fell to ``tol * max(f(w0), 1)``.
    """
    xt = np.ascontiguousarray(xt, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    w = np.array(w0, dtype=np.float64)
    resid = xt.T @ w - b
    f0 = float(resid @ resid + eta * (w @ w))
    threshold = tol * max(f0, 1.0)
    trace = []
    gap = np.inf
    it = 0
    while it < max_iter:
        grad = 2.0 * (xt @ resid + eta * w)
        s = int(np.argmin(grad))
        gap = float(grad @ w - grad[s])
        if gap <= threshold:
            break
        support = np.flatnonzero(w > 0.0)
        v = int(support[np.argmax(grad[support])])
        if v == s:
            break
        d_img = xt[s] - xt[v]
        curv = float(d_img @ d_img) + 2.0 * eta
        slope = float(grad[s] - grad[v])
        step = min(-0.5 * slope / curv, w[v]) if curv > 0 else w[v]
        if step <= 0.0:
            break
        w[s] += step
        w[v] -= step
        if w[v] < 0.0:
            w[v] = 0.0
        resid += step * d_img
        it += 1
        if it % 512 == 0:
            resid = xt.T @ w - b
        if record:
            trace.append(float(resid @ resid + eta * (w @ w)))
    return w, gap, it, np.asarray(trace, dtype=np.float64)
