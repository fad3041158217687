"""On-disk formats: sampled fields, charges, coefficient trees, figures.

Field files are .csv (a JSON metadata comment, a header row, one value
per line) or .bin (one JSON metadata line, then raw little-endian
float64), both row-major.  Charges, coefficient trees, and figures are
JSON documents.  All floats serialize through repr, so identical data
produces identical bytes.
"""

import json

import numpy as np

from . import __version__
from .charges import CubeCharge, FaberCoeffs
from .dyadic import CellField, CubeIndex, DyadicFigure, VertexField
from .errors import ValidationError

_FIELD_KINDS = {"vertex": VertexField, "cell": CellField}


def _side(kind, resolution):
    return 2 ** resolution + (1 if kind == "vertex" else 0)


def _field_kind(field):
    if isinstance(field, VertexField):
        return "vertex"
    if isinstance(field, CellField):
        return "cell"
    raise ValidationError("expected a VertexField or CellField")


def write_field(field, path):
    """Write a sampled field; the format follows the file extension."""
    kind = _field_kind(field)
    meta = {"kind": kind, "dim": field.dim, "resolution": field.resolution}
    header = json.dumps(meta, sort_keys=True)
    flat = field.values.ravel()
    if str(path).endswith(".bin"):
        with open(path, "wb") as fh:
            fh.write((header + "\n").encode("ascii"))
            fh.write(flat.astype("<f8").tobytes())
    else:
        with open(path, "w") as fh:
            fh.write("# %s\n" % header)
            fh.write("value\n")
            for v in flat:
                fh.write(repr(float(v)) + "\n")


def _parse_field_meta(line, path):
    try:
        meta = json.loads(line)
        kind = meta["kind"]
        dim = int(meta["dim"])
        resolution = int(meta["resolution"])
    except (ValueError, KeyError, TypeError):
        raise ValidationError("bad field metadata in %s" % path)
    if kind not in _FIELD_KINDS:
        raise ValidationError("unknown field kind %r in %s" % (kind, path))
    return kind, dim, resolution


def read_field(path):
    """Read a .csv or .bin field file back into its field type."""
    if str(path).endswith(".bin"):
        with open(path, "rb") as fh:
            header = fh.readline().decode("ascii").strip()
            kind, dim, res = _parse_field_meta(header, path)
            data = np.frombuffer(fh.read(), dtype="<f8")
    else:
        with open(path) as fh:
            first = fh.readline().strip()
            if not first.startswith("#"):
                raise ValidationError("missing metadata line in %s" % path)
            kind, dim, res = _parse_field_meta(first.lstrip("# "), path)
            if fh.readline().strip() != "value":
                raise ValidationError("missing header row in %s" % path)
            try:
                data = np.array([float(line) for line in fh if line.strip()])
            except ValueError:
                raise ValidationError("non-numeric value row in %s" % path)
    side = _side(kind, res)
    if data.size != side ** dim:
        raise ValidationError(
            "%s holds %d values, expected %d" % (path, data.size, side ** dim))
    return _FIELD_KINDS[kind](dim, res, data.reshape((side,) * dim))


def write_charge(cc: CubeCharge, path):
    doc = {
        "version": __version__,
        "kind": "charge",
        "dim": cc.dim,
        "depth": cc.depth,
        "layout": "row-major",
        "generations": [[float(v) for v in g.ravel()] for g in cc.gens],
    }
    _dump_json(doc, path)


def write_coeffs(fc: FaberCoeffs, path):
    doc = {
        "version": __version__,
        "kind": "coeffs",
        "dim": fc.dim,
        "depth": fc.depth,
        "layout": "row-major",
        "patterns": 2 ** fc.dim - 1,
        "exceptional": fc.exceptional,
        "generations": [[float(v) for v in g.ravel()] for g in fc.gens],
    }
    _dump_json(doc, path)


def _load_json(path):
    with open(path) as fh:
        try:
            return json.load(fh)
        except ValueError:
            raise ValidationError("%s is not valid JSON" % path)


def _dump_json(doc, path):
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _floats(rows):
    try:
        return [float(v) for v in rows]
    except (TypeError, ValueError):
        raise ValidationError("non-numeric generation data")


def read_charge(path) -> CubeCharge:
    doc = _load_json(path)
    if doc.get("kind") != "charge":
        raise ValidationError("%s is not a charge file" % path)
    try:
        dim = int(doc["dim"])
        depth = int(doc["depth"])
        raw = doc["generations"]
    except (KeyError, TypeError, ValueError):
        raise ValidationError("bad charge document in %s" % path)
    if len(raw) != depth + 1:
        raise ValidationError("charge needs one array per generation 0..N")
    gens = []
    for n, rows in enumerate(raw):
        shape = (2 ** n,) * dim
        vals = np.array(_floats(rows))
        if vals.size != 2 ** (n * dim):
            raise ValidationError("generation %d has wrong length" % n)
        gens.append(vals.reshape(shape))
    return CubeCharge(dim, depth, tuple(gens))


def read_coeffs(path) -> FaberCoeffs:
    doc = _load_json(path)
    if doc.get("kind") != "coeffs":
        raise ValidationError("%s is not a coefficient file" % path)
    try:
        dim = int(doc["dim"])
        depth = int(doc["depth"])
        exceptional = float(doc["exceptional"])
        raw = doc["generations"]
    except (KeyError, TypeError, ValueError):
        raise ValidationError("bad coefficient document in %s" % path)
    npat = 2 ** dim - 1
    if len(raw) != depth:
        raise ValidationError("coefficients need one array per generation")
    gens = []
    for n, rows in enumerate(raw):
        shape = (2 ** n,) * dim + (npat,)
        vals = np.array(_floats(rows))
        if vals.size != npat * 2 ** (n * dim):
            raise ValidationError("generation %d has wrong length" % n)
        gens.append(vals.reshape(shape))
    return FaberCoeffs(dim, depth, exceptional, tuple(gens))


def write_figure(fig: DyadicFigure, path):
    doc = {
        "version": __version__,
        "kind": "figure",
        "dim": fig.dim,
        "cubes": [{"gen": c.gen, "pos": list(c.pos)} for c in fig.cubes],
    }
    _dump_json(doc, path)


def read_figure(path) -> DyadicFigure:
    doc = _load_json(path)
    if doc.get("kind") != "figure":
        raise ValidationError("%s is not a figure file" % path)
    try:
        dim = int(doc["dim"])
        cubes = [CubeIndex(dim, int(c["gen"]), tuple(int(p) for p in c["pos"]))
                 for c in doc["cubes"]]
    except (KeyError, TypeError, ValueError):
        raise ValidationError("bad figure document in %s" % path)
    return DyadicFigure(cubes)


def write_artifact(payload: dict, config: dict, path):
    """JSON result document carrying the tool version and the run config."""
    doc = dict(payload)
    doc["version"] = __version__
    doc["config"] = config
    _dump_json(doc, path)


def write_csv(path, header, rows):
    """Plain CSV with one header row; floats via repr for determinism."""
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(
                repr(float(v)) if isinstance(v, float) else str(v)
                for v in row) + "\n")
