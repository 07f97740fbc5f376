"""Dense matrix-product-state helpers for the time-axis contraction.

Tensors have shape (left bond, physical, right bond).  Compression is the
standard two-pass sweep: QR to left-canonical form, then a right-to-left SVD
sweep discarding singular values below a relative cutoff.  States here are
unnormalized (they represent maps), so no rescaling is ever applied.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg


class BondCapError(RuntimeError):
    """Bond dimension would exceed the configured cap.

    Raise the cap, loosen the singular-value cutoff, or shorten the memory
    window.
    """


def _svd(mat):
    try:
        return np.linalg.svd(mat, full_matrices=False)
    except np.linalg.LinAlgError:
        return scipy.linalg.svd(mat, full_matrices=False, lapack_driver="gesvd")


def _keep_count(s, cutoff, max_bond, site):
    keep = int(np.sum(s > cutoff * s[0])) if s.size and s[0] > 0 else 1
    keep = max(keep, 1)
    if keep > max_bond:
        raise BondCapError(f"needed bond {keep} > cap {max_bond} at site {site}")
    return keep


class MPS:
    def __init__(self, tensors):
        self.tensors = list(tensors)

    def __len__(self):
        return len(self.tensors)

    def max_bond(self):
        return max(t.shape[2] for t in self.tensors[:-1]) if len(self) > 1 else 1

    def compress(self, cutoff, max_bond, *, skip_qr=False):
        """Two-pass sweep; returns the relative discarded weight.

        ``skip_qr`` skips the left-to-right orthogonalization pass for
        chains that are already left-canonical (weight at the last site).
        """
        ts = self.tensors
        n = len(ts)
        if n == 1:
            return 0.0
        if not skip_qr:
            for i in range(n - 1):
                l, d, r = ts[i].shape
                q, rr = np.linalg.qr(ts[i].reshape(l * d, r))
                k = q.shape[1]
                ts[i] = q.reshape(l, d, k)
                ts[i + 1] = np.einsum("ab,bdr->adr", rr, ts[i + 1])
        # Right-to-left SVD with truncation.
        discarded = 0.0
        for i in range(n - 1, 0, -1):
            l, d, r = ts[i].shape
            u, s, vh = _svd(ts[i].reshape(l, d * r))
            keep = _keep_count(s, cutoff, max_bond, i)
            if keep < s.size:
                discarded += float(np.sum(s[keep:] ** 2))
            ts[i] = vh[:keep].reshape(keep, d, r)
            us = u[:, :keep] * s[:keep]
            ts[i - 1] = np.einsum("ldr,rk->ldk", ts[i - 1], us)
        norm_sq = float(np.sum(np.abs(ts[0]) ** 2))
        return discarded / norm_sq if norm_sq > 0 else 0.0

    def sum_out(self, pos):
        """Contract site ``pos`` with a ones vector, merging into a neighbor."""
        t = self.tensors.pop(pos)
        mat = t.sum(axis=1)
        if pos < len(self.tensors):
            self.tensors[pos] = np.einsum("ab,bdr->adr", mat, self.tensors[pos])
        else:
            self.tensors[pos - 1] = np.einsum("ldr,rb->ldb", self.tensors[pos - 1], mat)

    def contract_marginal(self, keep_first):
        """Sum every physical leg except, optionally, site 0's.

        Returns a (d0, d_last) matrix when ``keep_first`` (site 0 physical
        leg vs last site physical leg) or a (d_last,) vector otherwise.
        """
        ts = self.tensors
        if keep_first:
            cur = ts[0][0]  # (d0, chi)
        else:
            cur = ts[0].sum(axis=1)[0][None, :]  # (1, chi)
            cur = cur[0]
        for t in ts[1:-1]:
            cur = cur @ t.sum(axis=1)
        last = ts[-1][:, :, 0]  # (chi, d_last)
        return cur @ last
