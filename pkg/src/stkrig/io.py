"""File formats used by the command line tools.

Locations travel as CSV with header ``site_id,x1,...,xd``; panel data as CSV
with header ``t,<site_id>,...`` and one row per time point. Model parameters
travel as JSON with keys sigma_e2, nu, c_coeffs, nugget and d; files written
by the estimation command wrap the same object under a "params" key and both
shapes are accepted wherever a model is read.
"""

from __future__ import annotations

import csv
import json
import os

import numpy as np

from .covmodel import ModelParams
from .spectral import TimeSeriesPanel


class PanelFormatError(ValueError):
    """An input file does not follow the documented layout."""


def _fmt(value) -> str:
    return repr(float(value))


def load_locations(path: str) -> tuple[list, np.ndarray]:
    """Read site identifiers and coordinates.

    Returns
    -------
    tuple
        (site_ids, coordinates) with coordinates of shape (m, d).
    """
    with open(path, newline="") as handle:
        rows = list(csv.reader(handle))
    if not rows:
        raise PanelFormatError("%s: empty locations file" % path)
    header = [c.strip() for c in rows[0]]
    if not header or header[0] != "site_id" or len(header) < 2:
        raise PanelFormatError(
            "%s: locations header must be 'site_id,x1,...,xd', got %r" % (path, rows[0])
        )
    d = len(header) - 1
    ids = []
    coords = []
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != d + 1:
            raise PanelFormatError(
                "%s: row %d has %d fields, expected %d" % (path, r, len(row), d + 1)
            )
        site = row[0].strip()
        if not site:
            raise PanelFormatError("%s: row %d, column 'site_id' is blank" % (path, r))
        if site in ids:
            raise PanelFormatError("%s: duplicate site id %r at row %d" % (path, site, r))
        point = []
        for c, cell in enumerate(row[1:], start=1):
            try:
                value = float(cell)
            except ValueError:
                raise PanelFormatError(
                    "%s: row %d, column %r: cannot parse %r as a number"
                    % (path, r, header[c], cell)
                ) from None
            if not np.isfinite(value):
                raise PanelFormatError(
                    "%s: row %d, column %r is not finite" % (path, r, header[c])
                )
            point.append(value)
        ids.append(site)
        coords.append(point)
    if not ids:
        raise PanelFormatError("%s: no sites found" % path)
    return ids, np.asarray(coords, dtype=float)


def load_series(path: str, site_ids: list) -> np.ndarray:
    """Read the observation matrix for the given sites, reordering columns
    to match site_ids. Every site must appear exactly once."""
    with open(path, newline="") as handle:
        rows = list(csv.reader(handle))
    if not rows:
        raise PanelFormatError("%s: empty series file" % path)
    header = [c.strip() for c in rows[0]]
    if not header or header[0] != "t":
        raise PanelFormatError(
            "%s: series header must start with 't', got %r" % (path, rows[0])
        )
    columns = header[1:]
    missing = [s for s in site_ids if s not in columns]
    extra = [s for s in columns if s not in site_ids]
    if missing or extra:
        raise PanelFormatError(
            "%s: series columns do not match the locations file; missing %r, "
            "unexpected %r" % (path, missing, extra)
        )
    if len(set(columns)) != len(columns):
        raise PanelFormatError("%s: duplicate series column" % path)
    order = [columns.index(s) + 1 for s in site_ids]
    data = []
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise PanelFormatError(
                "%s: row %d has %d fields, expected %d" % (path, r, len(row), len(header))
            )
        values = []
        for c in order:
            cell = row[c]
            try:
                value = float(cell)
            except ValueError:
                raise PanelFormatError(
                    "%s: row %d, column %r: cannot parse %r as a number"
                    % (path, r, header[c], cell)
                ) from None
            if not np.isfinite(value):
                raise PanelFormatError(
                    "%s: row %d, column %r is not finite" % (path, r, header[c])
                )
            values.append(value)
        data.append(values)
    if len(data) < 2:
        raise PanelFormatError("%s: need at least two time points, got %d" % (path, len(data)))
    return np.asarray(data, dtype=float).T


def load_panel(locations_path: str, series_path: str) -> TimeSeriesPanel:
    """Build a panel from a locations file and a series file."""
    ids, coords = load_locations(locations_path)
    observations = load_series(series_path, ids)
    try:
        return TimeSeriesPanel(locations=coords, observations=observations,
                               site_ids=tuple(ids))
    except ValueError as err:
        raise PanelFormatError("%s + %s: %s" % (locations_path, series_path, err)) from None


def save_panel(panel: TimeSeriesPanel, out_dir: str) -> tuple[str, str]:
    """Write locations.csv and series.csv into out_dir; returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    loc_path = os.path.join(out_dir, "locations.csv")
    series_path = os.path.join(out_dir, "series.csv")
    with open(loc_path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["site_id"] + ["x%d" % (k + 1) for k in range(panel.d)])
        for i, site in enumerate(panel.site_ids):
            writer.writerow([site] + [_fmt(v) for v in panel.locations[i]])
    with open(series_path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["t"] + list(panel.site_ids))
        for t in range(panel.n):
            writer.writerow([str(t + 1)] + [_fmt(v) for v in panel.observations[:, t]])
    return loc_path, series_path


def load_model(path: str) -> ModelParams:
    """Read model parameters from a bare JSON object or from an estimation
    result that wraps them under the "params" key."""
    with open(path) as handle:
        data = json.load(handle)
    if not isinstance(data, dict):
        raise PanelFormatError("%s: expected a JSON object" % path)
    payload = data.get("params", data)
    try:
        return ModelParams.from_dict(payload)
    except (ValueError, TypeError) as err:
        raise PanelFormatError("%s: %s" % (path, err)) from None


def load_single_series(path: str) -> np.ndarray:
    """Read a two-column CSV (t, value) into a single series."""
    with open(path, newline="") as handle:
        rows = list(csv.reader(handle))
    if not rows or len(rows[0]) < 2:
        raise PanelFormatError("%s: expected a header row 't,<name>'" % path)
    if rows[0][0].strip() != "t":
        raise PanelFormatError("%s: first column must be 't', got %r" % (path, rows[0][0]))
    values = []
    for r, row in enumerate(rows[1:], start=2):
        try:
            values.append(float(row[1]))
        except (IndexError, ValueError):
            raise PanelFormatError(
                "%s: row %d: cannot parse a number from %r" % (path, r, row)
            ) from None
    if len(values) < 2:
        raise PanelFormatError("%s: need at least two values" % path)
    return np.asarray(values, dtype=float)


def write_json(path: str, payload: dict) -> str:
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w") as handle:
        json.dump(payload, handle, indent=2)
        handle.write("\n")
    return path
