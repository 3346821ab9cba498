"""Data model and CSV serialization for indirectly-observed bipartite networks.

A compatibility network is a signed, weighted, bipartite graph whose node and
edge weights are statistical estimates carrying per-observation standard
errors.  Unobserved donor/recipient pairs are tracked with an explicit mask
rather than sentinel values, because zero is a meaningful weight.
"""

import csv
import os
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "CompatibilityNetwork",
    "NetworkPair",
    "NetworkFormatError",
    "compatibility",
    "load_network",
    "save_network",
]

_FMT = "%.17g"  # round-trip exact for IEEE doubles


class NetworkFormatError(ValueError):
    """Malformed or inconsistent network file content, with row context."""


def _as_1d(x, n, what):
    a = np.asarray(x, dtype=float)
    if a.shape != (n,):
        raise ValueError(f"{what} must have shape ({n},), got {a.shape}")
    return a


@dataclass(frozen=True)
class CompatibilityNetwork:
    """Bipartite signed weighted network with per-observation standard errors.

    Donor-side node weights/errors have length ``n_d``, recipient-side length
    ``n_r``; edge arrays are ``n_d x n_r``.  ``edge_mask`` is True where the
    pair was observed; edge weight/stderr values at masked-out positions are
    ignored everywhere downstream.
    """

    donor_labels: tuple
    recipient_labels: tuple
    donor_weight: np.ndarray
    donor_se: np.ndarray
    recipient_weight: np.ndarray
    recipient_se: np.ndarray
    edge_weight: np.ndarray
    edge_se: np.ndarray
    edge_mask: np.ndarray = field(default=None)

    def __post_init__(self):
        dl = tuple(str(x) for x in self.donor_labels)
        rl = tuple(str(x) for x in self.recipient_labels)
        n_d, n_r = len(dl), len(rl)
        if n_d < 1 or n_r < 1:
            raise ValueError("need at least one donor and one recipient node")
        if len(set(dl)) != n_d or len(set(rl)) != n_r:
            raise ValueError("node labels must be unique within each side")
        dw = _as_1d(self.donor_weight, n_d, "donor_weight")
        ds = _as_1d(self.donor_se, n_d, "donor_se")
        rw = _as_1d(self.recipient_weight, n_r, "recipient_weight")
        rs = _as_1d(self.recipient_se, n_r, "recipient_se")
        ew = np.asarray(self.edge_weight, dtype=float)
        es = np.asarray(self.edge_se, dtype=float)
        if ew.shape != (n_d, n_r) or es.shape != (n_d, n_r):
            raise ValueError(f"edge arrays must have shape ({n_d}, {n_r})")
        mask = self.edge_mask
        mask = np.ones((n_d, n_r), dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
        if mask.shape != (n_d, n_r):
            raise ValueError(f"edge_mask must have shape ({n_d}, {n_r})")
        if not mask.any():
            raise ValueError("edge_mask must have at least one observed pair")
        for v, s, what in ((dw, ds, "donor"), (rw, rs, "recipient")):
            if not np.all(np.isfinite(v)) or not np.all(np.isfinite(s)):
                raise ValueError(f"{what} node weights/stderrs must be finite")
            if not np.all(s > 0):
                raise ValueError(f"{what} node stderrs must be strictly positive")
        if not np.all(np.isfinite(ew[mask])) or not np.all(np.isfinite(es[mask])):
            raise ValueError("edge weights/stderrs must be finite at observed pairs")
        if not np.all(es[mask] > 0):
            raise ValueError("edge stderrs must be strictly positive at observed pairs")
        for name, val in (
            ("donor_labels", dl), ("recipient_labels", rl),
            ("donor_weight", dw), ("donor_se", ds),
            ("recipient_weight", rw), ("recipient_se", rs),
            ("edge_weight", ew), ("edge_se", es), ("edge_mask", mask),
        ):
            object.__setattr__(self, name, val)
        for a in (dw, ds, rw, rs, ew, es, mask):
            a.setflags(write=False)

    @property
    def n_d(self):
        return len(self.donor_labels)

    @property
    def n_r(self):
        return len(self.recipient_labels)


@dataclass(frozen=True)
class NetworkPair:
    """Index of one donor/recipient pair within a network."""

    donor_index: int
    recipient_index: int

    def check(self, net):
        if not (0 <= self.donor_index < net.n_d and 0 <= self.recipient_index < net.n_r):
            raise IndexError("pair index out of bounds for network")


def compatibility(delta, gamma, eta):
    """Total compatibility of a pair: node effect + node effect + pair affinity."""
    return delta + gamma + eta


def _read_rows(path, expected_header):
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise NetworkFormatError(f"{path}: empty file") from None
        if [h.strip() for h in header] != expected_header:
            raise NetworkFormatError(
                f"{path}: expected header {','.join(expected_header)}, got {','.join(header)}"
            )
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(expected_header):
                raise NetworkFormatError(f"{path}:{lineno}: expected {len(expected_header)} fields")
            rows.append((lineno, [c.strip() for c in row]))
    return rows


def _parse_float(path, lineno, text, what):
    try:
        v = float(text)
    except ValueError:
        raise NetworkFormatError(f"{path}:{lineno}: malformed {what} {text!r}") from None
    if not np.isfinite(v):
        raise NetworkFormatError(f"{path}:{lineno}: non-finite {what}")
    return v


def _load_nodes(path):
    labels, weights, ses = [], [], []
    seen = set()
    for lineno, (label, w, s) in _read_rows(path, ["node", "weight", "stderr"]):
        if label in seen:
            raise NetworkFormatError(f"{path}:{lineno}: duplicate node {label!r}")
        seen.add(label)
        se = _parse_float(path, lineno, s, "stderr")
        if se <= 0:
            raise NetworkFormatError(f"{path}:{lineno}: non-positive stderr for node {label!r}")
        labels.append(label)
        weights.append(_parse_float(path, lineno, w, "weight"))
        ses.append(se)
    if not labels:
        raise NetworkFormatError(f"{path}: no node rows")
    return labels, np.array(weights), np.array(ses)


def load_network(edges_path, donor_nodes_path, recipient_nodes_path):
    """Load a network from its three CSV files.

    Pairs absent from the edges file get ``edge_mask`` False.  Raises
    :class:`NetworkFormatError` with file/row context on malformed rows,
    duplicate pairs, non-positive standard errors, or unknown node labels.
    """
    dl, dw, ds = _load_nodes(donor_nodes_path)
    rl, rw, rs = _load_nodes(recipient_nodes_path)
    d_index = {lab: i for i, lab in enumerate(dl)}
    r_index = {lab: j for j, lab in enumerate(rl)}
    n_d, n_r = len(dl), len(rl)
    ew = np.zeros((n_d, n_r))
    es = np.ones((n_d, n_r))
    mask = np.zeros((n_d, n_r), dtype=bool)
    for lineno, (don, rec, w, s) in _read_rows(edges_path, ["donor", "recipient", "weight", "stderr"]):
        if don not in d_index:
            raise NetworkFormatError(f"{edges_path}:{lineno}: unknown donor node {don!r}")
        if rec not in r_index:
            raise NetworkFormatError(f"{edges_path}:{lineno}: unknown recipient node {rec!r}")
        i, j = d_index[don], r_index[rec]
        if mask[i, j]:
            raise NetworkFormatError(f"{edges_path}:{lineno}: duplicate pair ({don}, {rec})")
        se = _parse_float(edges_path, lineno, s, "stderr")
        if se <= 0:
            raise NetworkFormatError(
                f"{edges_path}:{lineno}: non-positive stderr for pair ({don}, {rec})"
            )
        ew[i, j] = _parse_float(edges_path, lineno, w, "weight")
        es[i, j] = se
        mask[i, j] = True
    if not mask.any():
        raise NetworkFormatError(f"{edges_path}: no edge rows")
    return CompatibilityNetwork(dl, rl, dw, ds, rw, rs, ew, es, mask)


def _csv_text(header, rows):
    lines = [",".join(header)]
    lines.extend(",".join(r) for r in rows)
    return "\n".join(lines) + "\n"


def save_network(net, dir_path):
    """Write edges.csv, donor_nodes.csv, recipient_nodes.csv under ``dir_path``.

    Weights are printed with 17 significant digits, so a load/save round trip
    is bit-exact.  The directory is created if absent.
    """
    from ._util import write_text_atomic

    os.makedirs(dir_path, exist_ok=True)
    for fname, labels, w, s in (
        ("donor_nodes.csv", net.donor_labels, net.donor_weight, net.donor_se),
        ("recipient_nodes.csv", net.recipient_labels, net.recipient_weight, net.recipient_se),
    ):
        rows = [(lab, _FMT % wv, _FMT % sv) for lab, wv, sv in zip(labels, w, s)]
        write_text_atomic(os.path.join(dir_path, fname), _csv_text(["node", "weight", "stderr"], rows))
    rows = []
    for i, dlab in enumerate(net.donor_labels):
        for j, rlab in enumerate(net.recipient_labels):
            if net.edge_mask[i, j]:
                rows.append((dlab, rlab, _FMT % net.edge_weight[i, j], _FMT % net.edge_se[i, j]))
    write_text_atomic(
        os.path.join(dir_path, "edges.csv"),
        _csv_text(["donor", "recipient", "weight", "stderr"], rows),
    )


def load_network_dir(dir_path):
    """Load a network from a directory written by :func:`save_network`."""
    return load_network(
        os.path.join(dir_path, "edges.csv"),
        os.path.join(dir_path, "donor_nodes.csv"),
        os.path.join(dir_path, "recipient_nodes.csv"),
    )
