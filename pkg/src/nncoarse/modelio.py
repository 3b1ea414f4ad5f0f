"""Plain-text persistence for trained surrogate models.

One file per subdomain model plus a manifest.  Every number is written with
17 significant digits, which round-trips float64 exactly, so a reloaded model
reproduces the in-memory one bit for bit.
"""

import os

import numpy as np

from .neural import Mlp
from .sampling import SampleSpec
from .surrogate import LocalSurrogate, GlobalSurrogate, N_LOCAL

__all__ = [
    "save_mlp",
    "load_mlp",
    "save_surrogate",
    "load_surrogate",
    "read_manifest",
    "ManifestError",
]

MANIFEST_NAME = "manifest.txt"


class ManifestError(ValueError):
    """Raised when a model directory is missing, malformed, or mismatched."""


def _fmt(values) -> str:
    return " ".join(f"{v:.17g}" for v in np.asarray(values, dtype=float).ravel())


def _parse(line: str) -> np.ndarray:
    return np.array(line.split(), dtype=float)


def _mlp_lines(net: Mlp) -> list[str]:
    lines = ["mlp " + " ".join(str(s) for s in net.layer_sizes)]
    for W, b in zip(net.weights, net.biases):
        lines.append(_fmt(W))
        lines.append(_fmt(b))
    return lines


def _mlp_from_lines(lines: list[str], pos: int, path: str) -> tuple[Mlp, int]:
    header = lines[pos].split()
    if header[0] != "mlp":
        raise ManifestError(f"{path}: expected an mlp header line")
    sizes = [int(s) for s in header[1:]]
    weights, biases = [], []
    pos += 1
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        w = _parse(lines[pos])
        b = _parse(lines[pos + 1])
        if w.size != n_in * n_out or b.size != n_out:
            raise ManifestError(f"{path}: layer size mismatch")
        weights.append(w.reshape(n_in, n_out))
        biases.append(b)
        pos += 2
    return Mlp(weights, biases), pos


def save_mlp(net: Mlp, path: str) -> None:
    with open(path, "w") as fh:
        fh.write("\n".join(_mlp_lines(net)) + "\n")


def load_mlp(path: str) -> Mlp:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    net, _ = _mlp_from_lines(lines, 0, path)
    return net


def save_local_surrogate(local: LocalSurrogate, path: str) -> None:
    lines = [
        f"surrogate {local.subdomain_id}",
        "base " + _fmt(local.base),
        "x_shift " + _fmt(local.x_shift),
        "x_scale " + _fmt(local.x_scale),
        "y_scale " + _fmt(local.y_scale),
        "box_center " + _fmt(local.box_center),
    ]
    lines.extend(_mlp_lines(local.net))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_local_surrogate(path: str, spec: SampleSpec) -> LocalSurrogate:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    head = lines[0].split()
    if head[0] != "surrogate":
        raise ManifestError(f"{path}: not a surrogate model file")
    sub_id = int(head[1])
    fields = {}
    pos = 1
    for key in ("base", "x_shift", "x_scale", "y_scale", "box_center"):
        name, _, rest = lines[pos].partition(" ")
        if name != key:
            raise ManifestError(f"{path}: expected {key} line, found {name!r}")
        fields[key] = _parse(rest)
        pos += 1
    net, _ = _mlp_from_lines(lines, pos, path)
    return LocalSurrogate(
        sub_id, net, fields["base"].reshape(N_LOCAL, N_LOCAL),
        fields["x_shift"], fields["x_scale"], fields["y_scale"],
        spec, fields["box_center"])


def save_surrogate(gs: GlobalSurrogate, directory: str,
                   grid_params: dict, spec: SampleSpec,
                   training_params: dict) -> None:
    """Write per-subdomain model files and the manifest into directory."""
    os.makedirs(directory, exist_ok=True)
    ids = sorted(gs.locals)
    lines = [f"{key} = {value}" for key, value in grid_params.items()]
    lines.append(f"box_half_width = {spec.box_half_width:.17g}")
    lines.append(f"ball_radius = {spec.ball_radius:.17g}")
    lines.append(f"box_draws = {spec.box_draws}")
    lines.append(f"ball_draws = {spec.ball_draws}")
    lines.extend(f"{key} = {value}" for key, value in training_params.items())
    lines.append("subdomain_ids = " + ",".join(str(i) for i in ids))
    with open(os.path.join(directory, MANIFEST_NAME), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    for i in ids:
        save_local_surrogate(gs.locals[i],
                             os.path.join(directory, f"model_{i:04d}.txt"))


def read_manifest(directory: str) -> dict:
    path = os.path.join(directory, MANIFEST_NAME)
    if not os.path.exists(path):
        raise ManifestError(f"no manifest found in {directory}")
    entries = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, _, value = line.partition("=")
            entries[key.strip()] = value.strip()
    return entries


def load_surrogate(directory: str, expected_grid: dict | None = None
                   ) -> tuple[GlobalSurrogate, dict]:
    """Load a saved surrogate; optionally verify grid parameters first."""
    manifest = read_manifest(directory)
    if expected_grid is not None:
        for key, want in expected_grid.items():
            got = manifest.get(key)
            if got is None or str(got) != str(want):
                raise ManifestError(
                    f"manifest {key}={got!r} does not match requested {want!r}")
    spec = SampleSpec(
        float(manifest["box_half_width"]), float(manifest["ball_radius"]),
        int(manifest["box_draws"]), int(manifest["ball_draws"]))
    ids = [int(s) for s in manifest["subdomain_ids"].split(",")]
    n_side = int(manifest["subdomains_per_side"])
    n_coarse = (n_side + 1) ** 2
    locals_ = {}
    for i in ids:
        path = os.path.join(directory, f"model_{i:04d}.txt")
        if not os.path.exists(path):
            raise ManifestError(f"missing model file {path}")
        locals_[i] = load_local_surrogate(path, spec)
    return GlobalSurrogate(locals_, n_coarse), manifest
