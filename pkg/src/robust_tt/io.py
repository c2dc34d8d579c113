"""Binary tensor files and problem bundles.

DTF1: ``DTF1 N d1 .. dN\\n`` then prod(d) little-endian doubles in
vectorization order.
TTF1: ``TTF1 N r0 d1 r1 .. dN rN\\n`` then each factor's left unfolding,
row-major, as little-endian doubles.
PRB1: a JSON bundle naming the ground-truth and measurement files; the
sensing operator is regenerated from ``master_seed``.
"""

import json
import os
from pathlib import Path

import numpy as np

from .errors import StructureError
from .sensing import CorruptionModel, GaussianEnsemble
from .tt import TTTensor, from_vec, left_fold, left_unfold, vec

LE = "<f8"


def _read_header(fh, magic):
    line = fh.readline()
    try:
        parts = line.decode("ascii").split()
    except UnicodeDecodeError:
        raise StructureError("unreadable header") from None
    if not parts or parts[0] != magic:
        raise StructureError(f"expected {magic} header")
    try:
        nums = [int(p) for p in parts[1:]]
    except ValueError:
        raise StructureError(f"malformed {magic} header") from None
    return nums


def _read_payload(fh, count):
    data = np.frombuffer(fh.read(), dtype=LE)
    if data.size != count:
        raise StructureError(f"payload holds {data.size} doubles, expected {count}")
    return data.astype(float)


def write_dtf(path, x):
    x = np.asarray(x, dtype=float)
    header = "DTF1 " + " ".join(str(v) for v in (x.ndim, *x.shape)) + "\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(vec(x).astype(LE).tobytes())


def read_dtf(path):
    with open(path, "rb") as fh:
        nums = _read_header(fh, "DTF1")
        if not nums or len(nums) != nums[0] + 1:
            raise StructureError("DTF1 header length does not match its order")
        dims = tuple(nums[1:])
        return from_vec(_read_payload(fh, int(np.prod(dims))), dims)


def write_ttf(path, tt):
    fields = [tt.order, 1]
    for f in tt.factors:
        fields += [f.shape[1], f.shape[2]]
    header = "TTF1 " + " ".join(str(v) for v in fields) + "\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        for f in tt.factors:
            fh.write(np.ascontiguousarray(left_unfold(f)).astype(LE).tobytes())


def read_ttf(path):
    with open(path, "rb") as fh:
        nums = _read_header(fh, "TTF1")
        if not nums or len(nums) != 2 * nums[0] + 2:
            raise StructureError("TTF1 header length does not match its order")
        n = nums[0]
        rs = nums[1::2]
        ds = nums[2::2]
        sizes = [rs[i] * ds[i] * rs[i + 1] for i in range(n)]
        data = _read_payload(fh, sum(sizes))
    factors, pos = [], 0
    for i in range(n):
        mat = data[pos:pos + sizes[i]].reshape(rs[i] * ds[i], rs[i + 1])
        factors.append(left_fold(mat, rs[i], ds[i]))
        pos += sizes[i]
    return TTTensor(factors)


def write_vector(path, v):
    with open(path, "wb") as fh:
        fh.write(np.asarray(v, dtype=float).astype(LE).tobytes())


def read_vector(path):
    return np.fromfile(path, dtype=LE).astype(float)


# --------------------------------------------------------------------------
# problem bundles

BUNDLE_KEYS = ("dims", "ranks", "m", "master_seed", "p_s", "outlier_sigma2",
               "support_seed", "value_seed", "xstar_file", "y_file")


def write_bundle(path, problem, xstar_file="xstar.ttf", y_file="y.bin"):
    """Write a PRB1 bundle plus its ground-truth and measurement files.

    File names are stored relative to the bundle's directory.
    """
    path = Path(path)
    root = path.parent
    x_star = problem.x_star
    if str(xstar_file).endswith(".dtf"):
        write_dtf(root / xstar_file, x_star.to_dense() if isinstance(x_star, TTTensor) else x_star)
    else:
        write_ttf(root / xstar_file, x_star)
    write_vector(root / y_file, problem.y)
    A, model = problem.ensemble, problem.model
    doc = {
        "format": "PRB1",
        "dims": list(A.dims),
        "ranks": list(x_star.ranks),
        "m": A.m,
        "master_seed": A.master_seed,
        "p_s": model.p_s,
        "outlier_sigma2": model.outlier_sigma2,
        "support_seed": model.support_seed,
        "value_seed": model.value_seed,
        "xstar_file": str(xstar_file),
        "y_file": str(y_file),
    }
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, path)
    return doc


class Bundle:
    """A loaded PRB1 bundle: ground truth, data and the regenerated operator."""

    def __init__(self, doc, x_star, y, ensemble, model):
        self.doc = doc
        self.x_star = x_star
        self.y = y
        self.ensemble = ensemble
        self.model = model

    @property
    def dims(self):
        return tuple(self.doc["dims"])

    @property
    def ranks(self):
        return tuple(self.doc["ranks"])


def read_bundle(path, storage="auto"):
    path = Path(path)
    doc = json.loads(path.read_text())
    missing = [k for k in BUNDLE_KEYS if k not in doc]
    if missing:
        raise StructureError(f"bundle is missing {', '.join(missing)}")
    root = path.parent
    xfile = root / doc["xstar_file"]
    x_star = read_dtf(xfile) if xfile.suffix == ".dtf" else read_ttf(xfile)
    y = read_vector(root / doc["y_file"])
    if y.size != doc["m"]:
        raise StructureError(f"measurement file holds {y.size} values, bundle says m={doc['m']}")
    A = GaussianEnsemble(doc["m"], doc["dims"], doc["master_seed"], storage=storage)
    model = CorruptionModel(doc["p_s"], doc["outlier_sigma2"], doc["support_seed"], doc["value_seed"])
    return Bundle(doc, x_star, y, A, model)
