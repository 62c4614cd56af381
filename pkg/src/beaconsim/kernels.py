"""Hot numeric kernels for the per-occasion radio computations.

Two interchangeable backends compute identical quantities:

* a Numba ``@njit`` backend (default when numba imports cleanly), and
* a vectorised pure-NumPy fallback.

Set ``BEACONSIM_NO_NUMBA=1`` (or numba's own ``NUMBA_DISABLE_JIT=1``) to force
the NumPy path; ``backend_name()`` reports which one is active.  Both paths
are kept test-equal to ~1e-12 relative (see tests/test_kernels.py) and
``benchmarks/bench_kernels.py`` compares their throughput.

Transmission arrays passed to the occasion kernels must be sorted by BeRB
index, with ``group_offsets`` delimiting each BeRB's slice (CSR style); the
interference sums in Eq.-style SINR only couple co-BeRB transmissions.
"""
from __future__ import annotations

import math
import os

import numpy as np

_SPEED_OF_LIGHT = 3.0e8

PL_MODEL_UMI = 0
PL_MODEL_LOG_DISTANCE = 1


def _numba_wanted() -> bool:
    if os.environ.get("BEACONSIM_NO_NUMBA", "").strip() not in ("", "0"):
        return False
    if os.environ.get("NUMBA_DISABLE_JIT", "").strip() not in ("", "0"):
        return False
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


_USE_NUMBA = _numba_wanted()


def backend_name() -> str:
    return "numba" if _USE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# NumPy reference implementations
# ---------------------------------------------------------------------------

def chi2_even_cdf_np(x: np.ndarray, half_dof: int) -> np.ndarray:
    """Central chi-squared CDF for even dof = 2*half_dof (Erlang closed form)."""
    x = np.asarray(x, dtype=np.float64)
    z = x / 2.0
    term = np.ones_like(z)
    acc = np.ones_like(z)
    for i in range(1, half_dof):
        term = term * z / i
        acc = acc + term
    return 1.0 - np.exp(-z) * acc


def torus_delta_np(a: np.ndarray, b: np.ndarray, span: float) -> np.ndarray:
    """Signed shortest displacement b - a on a 1-D torus of the given span."""
    d = (b - a) % span
    return np.where(d > span / 2.0, d - span, d)


def torus_dist_np(ax, ay, bx, by, w: float, h: float) -> np.ndarray:
    """Pairwise torus distance matrix between points (ax,ay) and (bx,by)."""
    dx = np.abs(ax[:, None] - bx[None, :])
    dx = np.minimum(dx, w - dx)
    dy = np.abs(ay[:, None] - by[None, :])
    dy = np.minimum(dy, h - dy)
    return np.hypot(dx, dy)


def path_loss_db_np(d2d, los_mask, model, fc_ghz, h_tx, h_rx, ref_db, exponent):
    """Distance-dependent path loss in dB (no shadowing) for a d2d matrix."""
    dh = h_rx - h_tx
    d3d = np.maximum(np.sqrt(d2d * d2d + dh * dh), 1.0)
    if model == PL_MODEL_LOG_DISTANCE:
        return ref_db + 10.0 * exponent * np.log10(d3d)
    lg_fc = math.log10(fc_ghz)
    he_tx = max(h_tx - 1.0, 0.01)
    he_rx = max(h_rx - 1.0, 0.01)
    dbp = 4.0 * he_tx * he_rx * fc_ghz * 1e9 / _SPEED_OF_LIGHT
    lg_d = np.log10(d3d)
    pl_los = np.where(
        d3d < dbp,
        22.0 * lg_d + 28.0 + 20.0 * lg_fc,
        40.0 * lg_d + 28.0 + 20.0 * lg_fc - 9.0 * math.log10(dbp * dbp + dh * dh),
    )
    h_ut = min(h_tx, h_rx)
    pl_nlos = np.maximum(
        36.7 * lg_d + 22.7 + 26.0 * lg_fc - 0.3 * (h_ut - 1.5), pl_los
    )
    return np.where(los_mask, pl_los, pl_nlos)


def _rho_matrix_np(root, shift, n_z):
    same_pair = (root[:, None] == root[None, :]) & (shift[:, None] == shift[None, :])
    same_root = root[:, None] == root[None, :]
    rho = np.where(same_pair, 1.0, np.where(same_root, 0.0, 1.0 / math.sqrt(n_z)))
    np.fill_diagonal(rho, 0.0)
    return rho


def occasion_stats_np(
    tx_x, tx_y, power_w, root, shift, group_offsets,
    rx_x, rx_y, los, shadow_db, h2,
    model, fc_ghz, h_tx, h_rx, ref_db, exponent,
    noise_w, n_z, lam, n_ant, d_search, beacon_range, world_w, world_h,
):
    """Per-occasion SINR / miss-detection statistics, NumPy backend.

    Returns (d2d, rx_w, sinr, pmd), each (n_tx, n_rx).  ``pmd`` is forced to
    1.0 beyond ``beacon_range``.
    """
    d2d = torus_dist_np(tx_x, tx_y, rx_x, rx_y, world_w, world_h)
    pl = path_loss_db_np(d2d, los, model, fc_ghz, h_tx, h_rx, ref_db, exponent)
    g = np.power(10.0, (shadow_db - pl) / 10.0)
    rx_w = power_w[:, None] * g * h2
    interference = np.zeros_like(rx_w)
    for gi in range(len(group_offsets) - 1):
        lo, hi = group_offsets[gi], group_offsets[gi + 1]
        if hi - lo == 0:
            continue
        rho = _rho_matrix_np(root[lo:hi], shift[lo:hi], n_z)
        interference[lo:hi] = rho @ rx_w[lo:hi]
    sinr = rx_w / (noise_w + interference)
    pmd_in = (
        chi2_even_cdf_np(np.full_like(sinr, lam), n_ant) ** (d_search - 1)
        * chi2_even_cdf_np(lam / (1.0 + n_z * sinr), n_ant)
    )
    pmd = np.where(d2d <= beacon_range, pmd_in, 1.0)
    return d2d, rx_w, sinr, pmd


def member_reception_np(
    mem_x, mem_y, mem_ue, own_tx_index, listen_offsets,
    tx_x, tx_y, power_w, root, shift, tx_slice_lo, tx_slice_hi, tx_ue,
    los_uu, shadow_uu, h2_flat,
    model, fc_ghz, h_ue, ref_db, exponent,
    noise_w, n_z, lam, n_ant, d_search, beacon_range, world_w, world_h,
):
    """Group-beacon reception at member UEs, NumPy backend.

    For listener ``l`` the co-BeRB transmissions are ``tx_slice_lo[l]`` to
    ``tx_slice_hi[l]`` in the (BeRB-sorted) transmission arrays; fading draws
    for those links sit in ``h2_flat[listen_offsets[l]:listen_offsets[l+1]]``.
    Returns (own_d2d, sinr, pmd) per listener.
    """
    n = len(mem_x)
    sinr = np.zeros(n)
    own_d = np.zeros(n)
    for li in range(n):
        lo, hi = tx_slice_lo[li], tx_slice_hi[li]
        ks = np.arange(lo, hi)
        dx = np.abs(tx_x[ks] - mem_x[li])
        dx = np.minimum(dx, world_w - dx)
        dy = np.abs(tx_y[ks] - mem_y[li])
        dy = np.minimum(dy, world_h - dy)
        d2d = np.hypot(dx, dy)
        ue_rows = tx_ue[ks]
        pl = path_loss_db_np(
            d2d, los_uu[ue_rows, mem_ue[li]], model, fc_ghz, h_ue, h_ue,
            ref_db, exponent,
        )
        g = np.power(10.0, (shadow_uu[ue_rows, mem_ue[li]] - pl) / 10.0)
        h2 = h2_flat[listen_offsets[li]:listen_offsets[li + 1]]
        rx = power_w[ks] * g * h2
        own = own_tx_index[li]
        o_root, o_shift = root[own], shift[own]
        same_pair = (root[ks] == o_root) & (shift[ks] == o_shift)
        rho = np.where(same_pair, 1.0, np.where(root[ks] == o_root, 0.0, 1.0 / math.sqrt(n_z)))
        signal = rx[ks == own].sum()
        interf = float((rho * rx)[ks != own].sum())
        sinr[li] = signal / (noise_w + interf)
        own_d[li] = d2d[ks == own][0]
    pmd_in = (
        chi2_even_cdf_np(np.full(n, lam), n_ant) ** (d_search - 1)
        * chi2_even_cdf_np(lam / (1.0 + n_z * sinr), n_ant)
    )
    pmd = np.where(own_d <= beacon_range, pmd_in, 1.0)
    return own_d, sinr, pmd


# ---------------------------------------------------------------------------
# Numba backend
# ---------------------------------------------------------------------------

if _USE_NUMBA:
    from numba import njit

    @njit(cache=True)
    def _chi2_even_cdf_nb(x: float, half_dof: int) -> float:
        z = x / 2.0
        term = 1.0
        acc = 1.0
        for i in range(1, half_dof):
            term = term * z / i
            acc = acc + term
        return 1.0 - math.exp(-z) * acc

    @njit(cache=True)
    def _pl_db_nb(d2d, los, model, fc_ghz, h_tx, h_rx, ref_db, exponent):
        dh = h_rx - h_tx
        d3d = math.sqrt(d2d * d2d + dh * dh)
        if d3d < 1.0:
            d3d = 1.0
        if model == PL_MODEL_LOG_DISTANCE:
            return ref_db + 10.0 * exponent * math.log10(d3d)
        lg_fc = math.log10(fc_ghz)
        he_tx = max(h_tx - 1.0, 0.01)
        he_rx = max(h_rx - 1.0, 0.01)
        dbp = 4.0 * he_tx * he_rx * fc_ghz * 1e9 / _SPEED_OF_LIGHT
        lg_d = math.log10(d3d)
        if d3d < dbp:
            pl_los = 22.0 * lg_d + 28.0 + 20.0 * lg_fc
        else:
            pl_los = (
                40.0 * lg_d + 28.0 + 20.0 * lg_fc
                - 9.0 * math.log10(dbp * dbp + dh * dh)
            )
        if los:
            return pl_los
        h_ut = min(h_tx, h_rx)
        pl_nlos = 36.7 * lg_d + 22.7 + 26.0 * lg_fc - 0.3 * (h_ut - 1.5)
        return max(pl_nlos, pl_los)

    @njit(cache=True)
    def _occasion_stats_nb(
        tx_x, tx_y, power_w, root, shift, group_offsets,
        rx_x, rx_y, los, shadow_db, h2,
        model, fc_ghz, h_tx, h_rx, ref_db, exponent,
        noise_w, n_z, lam, n_ant, d_search, beacon_range, world_w, world_h,
    ):
        m = tx_x.shape[0]
        n = rx_x.shape[0]
        d2d = np.empty((m, n))
        rx_w = np.empty((m, n))
        inv_sqrt_nz = 1.0 / math.sqrt(n_z)
        for i in range(m):
            for j in range(n):
                dx = abs(tx_x[i] - rx_x[j])
                if dx > world_w - dx:
                    dx = world_w - dx
                dy = abs(tx_y[i] - rx_y[j])
                if dy > world_h - dy:
                    dy = world_h - dy
                d = math.sqrt(dx * dx + dy * dy)
                d2d[i, j] = d
                pl = _pl_db_nb(d, los[i, j], model, fc_ghz, h_tx, h_rx, ref_db, exponent)
                rx_w[i, j] = power_w[i] * 10.0 ** ((shadow_db[i, j] - pl) / 10.0) * h2[i, j]
        sinr = np.empty((m, n))
        pmd = np.empty((m, n))
        fa_factor = _chi2_even_cdf_nb(lam, n_ant) ** (d_search - 1)
        for gi in range(group_offsets.shape[0] - 1):
            lo = group_offsets[gi]
            hi = group_offsets[gi + 1]
            for i in range(lo, hi):
                for j in range(n):
                    interf = 0.0
                    for k in range(lo, hi):
                        if k == i:
                            continue
                        if root[k] == root[i]:
                            if shift[k] == shift[i]:
                                interf += rx_w[k, j]
                        else:
                            interf += inv_sqrt_nz * rx_w[k, j]
                    s = rx_w[i, j] / (noise_w + interf)
                    sinr[i, j] = s
                    if d2d[i, j] <= beacon_range:
                        pmd[i, j] = fa_factor * _chi2_even_cdf_nb(lam / (1.0 + n_z * s), n_ant)
                    else:
                        pmd[i, j] = 1.0
        return d2d, rx_w, sinr, pmd

    @njit(cache=True)
    def _member_reception_nb(
        mem_x, mem_y, mem_ue, own_tx_index, listen_offsets,
        tx_x, tx_y, power_w, root, shift, tx_slice_lo, tx_slice_hi, tx_ue,
        los_uu, shadow_uu, h2_flat,
        model, fc_ghz, h_ue, ref_db, exponent,
        noise_w, n_z, lam, n_ant, d_search, beacon_range, world_w, world_h,
    ):
        n = mem_x.shape[0]
        sinr = np.empty(n)
        own_d = np.empty(n)
        pmd = np.empty(n)
        inv_sqrt_nz = 1.0 / math.sqrt(n_z)
        fa_factor = _chi2_even_cdf_nb(lam, n_ant) ** (d_search - 1)
        for li in range(n):
            own = own_tx_index[li]
            signal = 0.0
            interf = 0.0
            pos = listen_offsets[li]
            for k in range(tx_slice_lo[li], tx_slice_hi[li]):
                dx = abs(tx_x[k] - mem_x[li])
                if dx > world_w - dx:
                    dx = world_w - dx
                dy = abs(tx_y[k] - mem_y[li])
                if dy > world_h - dy:
                    dy = world_h - dy
                d = math.sqrt(dx * dx + dy * dy)
                pl = _pl_db_nb(
                    d, los_uu[tx_ue[k], mem_ue[li]], model, fc_ghz, h_ue, h_ue,
                    ref_db, exponent,
                )
                rx = power_w[k] * 10.0 ** ((shadow_uu[tx_ue[k], mem_ue[li]] - pl) / 10.0)
                rx *= h2_flat[pos]
                pos += 1
                if k == own:
                    signal = rx
                    own_d[li] = d
                elif root[k] == root[own]:
                    if shift[k] == shift[own]:
                        interf += rx
                else:
                    interf += inv_sqrt_nz * rx
            s = signal / (noise_w + interf)
            sinr[li] = s
            if own_d[li] <= beacon_range:
                pmd[li] = fa_factor * _chi2_even_cdf_nb(lam / (1.0 + n_z * s), n_ant)
            else:
                pmd[li] = 1.0
        return own_d, sinr, pmd


def occasion_stats(*args):
    """Dispatch the per-occasion kernel to the active backend."""
    if _USE_NUMBA:
        return _occasion_stats_nb(*args)
    return occasion_stats_np(*args)


def member_reception(*args):
    """Dispatch the member-reception kernel to the active backend."""
    if _USE_NUMBA:
        return _member_reception_nb(*args)
    return member_reception_np(*args)
