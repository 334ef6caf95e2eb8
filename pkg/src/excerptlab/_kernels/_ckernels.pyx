# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: LZW, binary RLE and pairwise Frank-Wolfe.

Must stay output-identical to ``_fallback``.
"""

import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, realloc, free
from libc.string cimport memset
from libc.stdint cimport int32_t, int64_t, uint8_t, uint64_t

cnp.import_array()

cdef enum:
    MIN_WIDTH = 9
    MAX_ENTRIES = 65536


cdef inline int _width(Py_ssize_t index) nogil:
    cdef Py_ssize_t size = 256 + index
    cdef int w = 0
    if size > MAX_ENTRIES:
        size = MAX_ENTRIES
    size -= 1
    while size > 0:
        w += 1
        size >>= 1
    return w if w > MIN_WIDTH else MIN_WIDTH


def lzw_encode(data):
    cdef const uint8_t[:] src = memoryview(bytes(data))
    cdef Py_ssize_t n = src.shape[0]
    if n == 0:
        return b""
    # open-addressing table keyed by prefix * 256 + byte
    cdef Py_ssize_t slots = 1024
    while slots < 4 * (n if n < MAX_ENTRIES else MAX_ENTRIES):
        slots <<= 1
    cdef uint64_t mask = slots - 1
    cdef int32_t *keys = <int32_t *> malloc(slots * sizeof(int32_t))
    cdef int32_t *vals = <int32_t *> malloc(slots * sizeof(int32_t))
    # worst case: every byte emits a 16-bit code
    cdef uint8_t *out = <uint8_t *> malloc(2 * n + 8)
    if keys == NULL or vals == NULL or out == NULL:
        free(keys); free(vals); free(out)
        raise MemoryError()
    memset(keys, 0xFF, slots * sizeof(int32_t))
    cdef Py_ssize_t i, index = 0, nout = 0
    cdef int32_t prefix = src[0], next_code = 256, key
    cdef uint64_t acc = 0, h
    cdef int nbits = 0, width
    cdef bint found
    try:
        for i in range(1, n + 1):
            if i < n:
                key = prefix * 256 + src[i]
                h = (<uint64_t> key * 2654435761ULL) & mask
                found = False
                while keys[h] != -1:
                    if keys[h] == key:
                        found = True
                        break
                    h = (h + 1) & mask
                if found:
                    prefix = vals[h]
                    continue
            width = _width(index)
            index += 1
            acc = (acc << width) | <uint64_t> prefix
            nbits += width
            while nbits >= 8:
                nbits -= 8
                out[nout] = (acc >> nbits) & 0xFF
                nout += 1
            acc &= ((<uint64_t> 1) << nbits) - 1
            if i < n:
                if next_code < MAX_ENTRIES:
                    keys[h] = key
                    vals[h] = next_code
                    next_code += 1
                prefix = src[i]
        if nbits:
            out[nout] = (acc << (8 - nbits)) & 0xFF
            nout += 1
        return bytes(<uint8_t[:nout]> out) if nout else b""
    finally:
        free(keys)
        free(vals)
        free(out)


def lzw_decode(data):
    cdef const uint8_t[:] src = memoryview(bytes(data))
    cdef Py_ssize_t nbytes = src.shape[0]
    cdef Py_ssize_t total_bits = 8 * nbytes
    # entry k = entry[prefix[k]] + last[k]; first[k] caches the leading byte
    cdef int32_t *prefix = <int32_t *> malloc(MAX_ENTRIES * sizeof(int32_t))
    cdef uint8_t *last = <uint8_t *> malloc(MAX_ENTRIES)
    cdef uint8_t *first = <uint8_t *> malloc(MAX_ENTRIES)
    cdef int32_t *length = <int32_t *> malloc(MAX_ENTRIES * sizeof(int32_t))
    cdef Py_ssize_t cap = 4 * nbytes + 64
    cdef uint8_t *out = <uint8_t *> malloc(cap)
    cdef uint8_t *grown
    if prefix == NULL or last == NULL or first == NULL or length == NULL or out == NULL:
        free(prefix); free(last); free(first); free(length); free(out)
        raise MemoryError()
    cdef Py_ssize_t k
    for k in range(256):
        prefix[k] = -1
        last[k] = k
        first[k] = k
        length[k] = 1
    cdef int32_t n_entries = 256, code, prev = -1, c
    cdef Py_ssize_t pos = 0, index = 0, nout = 0, j
    cdef int width
    cdef uint64_t acc = 0
    cdef int accbits = 0
    cdef Py_ssize_t byte_pos = 0
    cdef uint8_t first_byte
    try:
        while True:
            width = _width(index)
            if total_bits - pos < width:
                break
            while accbits < width:
                acc = (acc << 8) | src[byte_pos]
                byte_pos += 1
                accbits += 8
            accbits -= width
            code = (acc >> accbits) & ((1 << width) - 1)
            acc &= ((<uint64_t> 1) << accbits) - 1
            pos += width
            index += 1
            if code < n_entries:
                first_byte = first[code]
            elif prev >= 0 and code == n_entries:
                first_byte = first[prev]
            else:
                raise ValueError(f"invalid LZW code {code} at code index {index - 1}")
            if prev >= 0 and n_entries < MAX_ENTRIES:
                prefix[n_entries] = prev
                last[n_entries] = first_byte
                first[n_entries] = first[prev]
                length[n_entries] = length[prev] + 1
                n_entries += 1
            if nout + length[code] > cap:
                while nout + length[code] > cap:
                    cap *= 2
                grown = <uint8_t *> realloc(out, cap)
                if grown == NULL:
                    raise MemoryError()
                out = grown
            c = code
            j = nout + length[code] - 1
            nout += length[code]
            while c >= 0:
                out[j] = last[c]
                j -= 1
                c = prefix[c]
            prev = code
        return bytes(<uint8_t[:nout]> out) if nout else b""
    finally:
        free(prefix)
        free(last)
        free(first)
        free(length)
        free(out)


def rle_binary_encode(data):
    cdef const uint8_t[:] src = memoryview(bytes(data))
    cdef Py_ssize_t n = src.shape[0], i = 0, j, nout = 0
    cdef uint8_t value
    cdef uint8_t *out = <uint8_t *> malloc(2 * n + 1)
    if out == NULL:
        raise MemoryError()
    try:
        while i < n:
            value = src[i]
            j = i + 1
            while j < n and src[j] == value and j - i < 255:
                j += 1
            out[nout] = j - i
            out[nout + 1] = value
            nout += 2
            i = j
        return bytes(<uint8_t[:nout]> out) if nout else b""
    finally:
        free(out)


def rle_binary_decode(data):
    cdef const uint8_t[:] src = memoryview(bytes(data))
    cdef Py_ssize_t n = src.shape[0], k, total = 0, pos = 0
    if n % 2:
        raise ValueError("binary RLE stream must hold (count, value) pairs")
    for k in range(0, n, 2):
        if src[k] == 0:
            raise ValueError(f"zero run count at offset {k}")
        total += src[k]
    buf = bytearray(total)
    cdef uint8_t[:] dst = buf
    for k in range(0, n, 2):
        memset(&dst[pos], src[k + 1], src[k])
        pos += src[k]
    return bytes(buf)


def simplex_lsq(xt, b, double eta, w0, double tol, Py_ssize_t max_iter, bint record=False):
    cdef double[:, ::1] X = np.ascontiguousarray(xt, dtype=np.float64)
    cdef double[::1] B = np.ascontiguousarray(b, dtype=np.float64)
    w_arr = np.array(w0, dtype=np.float64)
    cdef double[::1] w = w_arr
    cdef Py_ssize_t n = X.shape[0], t = X.shape[1]
    resid_arr = np.empty(t)
    grad_arr = np.empty(n)
    dimg_arr = np.empty(t)
    cdef double[::1] resid = resid_arr
    cdef double[::1] grad = grad_arr
    cdef double[::1] dimg = dimg_arr
    trace_list = []
    cdef Py_ssize_t i, j, s, v, it = 0
    cdef double acc, f0, threshold, gap = np.inf, gmin, gmax, curv, slope, step, gw

    xt_np = np.asarray(X)
    b_np = np.asarray(B)
    resid_arr[:] = xt_np.T @ w_arr - b_np
    f0 = float(resid_arr @ resid_arr + eta * (w_arr @ w_arr))
    threshold = tol * (f0 if f0 > 1.0 else 1.0)
    while it < max_iter:
        s = 0
        gmin = 0.0
        gw = 0.0
        for i in range(n):
            acc = 0.0
            for j in range(t):
                acc += X[i, j] * resid[j]
            grad[i] = 2.0 * (acc + eta * w[i])
            gw += grad[i] * w[i]
            if i == 0 or grad[i] < gmin:
                gmin = grad[i]
                s = i
        gap = gw - gmin
        if gap <= threshold:
            break
        v = -1
        gmax = 0.0
        for i in range(n):
            if w[i] > 0.0 and (v < 0 or grad[i] > gmax):
                gmax = grad[i]
                v = i
        if v == s or v < 0:
            break
        curv = 2.0 * eta
        for j in range(t):
            dimg[j] = X[s, j] - X[v, j]
            curv += dimg[j] * dimg[j]
        slope = grad[s] - grad[v]
        if curv > 0.0:
            step = -0.5 * slope / curv
            if step > w[v]:
                step = w[v]
        else:
            step = w[v]
        if step <= 0.0:
            break
        w[s] += step
        w[v] -= step
        if w[v] < 0.0:
            w[v] = 0.0
        for j in range(t):
            resid[j] += step * dimg[j]
        it += 1
        if it % 512 == 0:
            resid_arr[:] = xt_np.T @ w_arr - b_np
        if record:
            acc = 0.0
            for j in range(t):
                acc += resid[j] * resid[j]
            gw = 0.0
            for i in range(n):
                gw += w[i] * w[i]
            trace_list.append(acc + eta * gw)
    return w_arr, gap, it, np.asarray(trace_list, dtype=np.float64)
