# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled radix-2 FFT kernel."""
from libc.stdlib cimport free, malloc


cdef void _fft_row(double* a, Py_ssize_t m, const long long* bitrev,
                   const double* tw) noexcept nogil:
    # a holds m interleaved (re, im) pairs, tw holds m/2 interleaved twiddles
    cdef Py_ssize_t i, j, start, size, half, step, p, q
    cdef double tr, ti, ur, ui, wr, wi
    for i in range(m):
        j = bitrev[i]
        if j > i:
            tr = a[2 * i]
            ti = a[2 * i + 1]
            a[2 * i] = a[2 * j]
            a[2 * i + 1] = a[2 * j + 1]
            a[2 * j] = tr
            a[2 * j + 1] = ti
    size = 2
    while size <= m:
        half = size >> 1
        step = m // size
        start = 0
        while start < m:
            for j in range(half):
                wr = tw[2 * j * step]
                wi = tw[2 * j * step + 1]
                p = 2 * (start + j)
                q = p + 2 * half
                tr = wr * a[q] - wi * a[q + 1]
                ti = wr * a[q + 1] + wi * a[q]
                ur = a[p]
                ui = a[p + 1]
                a[p] = ur + tr
                a[p + 1] = ui + ti
                a[q] = ur - tr
                a[q + 1] = ui - ti
            start += size
        size <<= 1


def fft_pow2_rows(double complex[:, ::1] a, const long long[::1] bitrev,
                  const double complex[::1] twiddles):
    """Forward FFT of every row of ``a`` in place.

    ``bitrev`` is the bit-reversal permutation of the row length and
    ``twiddles[j] = exp(-2*pi*i*j/m)`` for ``j < m/2``.
    """
    cdef Py_ssize_t rows = a.shape[0]
    cdef Py_ssize_t m = a.shape[1]
    cdef Py_ssize_t r
    if rows == 0 or m == 0:
        return
    cdef const double* tw = <const double*> &twiddles[0]
    cdef const long long* br = &bitrev[0]
    with nogil:
        for r in range(rows):
            _fft_row(<double*> &a[r, 0], m, br, tw)


def bluestein_rows(const double complex[:, ::1] x, double complex[:, ::1] out,
                   const long long[::1] bitrev, const double complex[::1] twiddles,
                   const double complex[::1] chirp, const double complex[::1] b_hat):
    """Forward DFT of every row of ``x`` (any length n) into ``out``.

    ``chirp[j] = exp(-i*pi*j^2/n)`` and ``b_hat`` is the length-m FFT of the
    conjugate chirp kernel, m being the power of two used for the convolution.
    """
    cdef Py_ssize_t rows = x.shape[0]
    cdef Py_ssize_t n = x.shape[1]
    cdef Py_ssize_t m = b_hat.shape[0]
    cdef Py_ssize_t r, j
    cdef double xr, xi, cr, ci, br, bi, inv_m = 1.0 / m
    if rows == 0:
        return
    cdef double* w = <double*> malloc(2 * m * sizeof(double))
    if w == NULL:
        raise MemoryError()
    cdef const double* xs
    cdef double* os
    cdef const double* ch = <const double*> &chirp[0]
    cdef const double* bh = <const double*> &b_hat[0]
    cdef const double* tw = <const double*> &twiddles[0]
    cdef const long long* brv = &bitrev[0]
    with nogil:
        for r in range(rows):
            xs = <const double*> &x[r, 0]
            os = <double*> &out[r, 0]
            for j in range(n):
                xr = xs[2 * j]
                xi = xs[2 * j + 1]
                cr = ch[2 * j]
                ci = ch[2 * j + 1]
                w[2 * j] = xr * cr - xi * ci
                w[2 * j + 1] = xr * ci + xi * cr
            for j in range(2 * n, 2 * m):
                w[j] = 0.0
            _fft_row(w, m, brv, tw)
            # multiply by b_hat and conjugate, so a forward FFT gives the inverse
            for j in range(m):
                xr = w[2 * j]
                xi = w[2 * j + 1]
                br = bh[2 * j]
                bi = bh[2 * j + 1]
                w[2 * j] = xr * br - xi * bi
                w[2 * j + 1] = -(xr * bi + xi * br)
            _fft_row(w, m, brv, tw)
            for j in range(n):
                xr = w[2 * j] * inv_m
                xi = -w[2 * j + 1] * inv_m
                cr = ch[2 * j]
                ci = ch[2 * j + 1]
                os[2 * j] = xr * cr - xi * ci
                os[2 * j + 1] = xr * ci + xi * cr
    free(w)
