"""Deterministic SVG renderings of encounters and cluster sample grids.

Each vehicle is drawn as a polyline in its own stroke color with a filled
circle at the start position and a cross at the end position; axes are
labeled longitude/latitude.  Output is plain SVG 1.1 built with ElementTree,
so documents are always well-formed XML and byte-stable across runs.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from typing import Sequence

from .encounter import Encounter

SVG_NS = "http://www.w3.org/2000/svg"

STROKE_A = "#1f77b4"
STROKE_B = "#d62728"


def _fmt(v: float) -> str:
    return f"{v:.2f}"


class _Frame:
    """Maps lon/lat data coordinates onto a pixel viewport."""

    def __init__(self, lons, lats, x0, y0, width, height):
        lon_min, lon_max = min(lons), max(lons)
        lat_min, lat_max = min(lats), max(lats)
        pad_lon = (lon_max - lon_min) * 0.05 or 1e-4
        pad_lat = (lat_max - lat_min) * 0.05 or 1e-4
        self.lon_min, self.lon_max = lon_min - pad_lon, lon_max + pad_lon
        self.lat_min, self.lat_max = lat_min - pad_lat, lat_max + pad_lat
        self.x0, self.y0, self.width, self.height = x0, y0, width, height

    def x(self, lon: float) -> float:
        frac = (lon - self.lon_min) / (self.lon_max - self.lon_min)
        return self.x0 + frac * self.width

    def y(self, lat: float) -> float:
        frac = (lat - self.lat_min) / (self.lat_max - self.lat_min)
        return self.y0 + (1.0 - frac) * self.height  # lat grows upward


def _axes(parent, frame: _Frame, x_label: str = "longitude",
          y_label: str = "latitude") -> None:
    ET.SubElement(parent, "rect", {
        "x": _fmt(frame.x0), "y": _fmt(frame.y0),
        "width": _fmt(frame.width), "height": _fmt(frame.height),
        "fill": "none", "stroke": "#444444", "stroke-width": "1",
        "class": "axes",
    })
    label = ET.SubElement(parent, "text", {
        "x": _fmt(frame.x0 + frame.width / 2), "y": _fmt(frame.y0 + frame.height + 28),
        "text-anchor": "middle", "font-size": "11", "fill": "#222222",
    })
    label.text = x_label
    ylab = ET.SubElement(parent, "text", {
        "x": _fmt(frame.x0 - 34), "y": _fmt(frame.y0 + frame.height / 2),
        "text-anchor": "middle", "font-size": "11", "fill": "#222222",
        "transform": (f"rotate(-90 {_fmt(frame.x0 - 34)} "
                      f"{_fmt(frame.y0 + frame.height / 2)})"),
    })
    ylab.text = y_label
    for text, x, y, anchor in (
            (f"{frame.lon_min:.4f}", frame.x0, frame.y0 + frame.height + 14, "start"),
            (f"{frame.lon_max:.4f}", frame.x0 + frame.width, frame.y0 + frame.height + 14, "end"),
            (f"{frame.lat_min:.4f}", frame.x0 - 4, frame.y0 + frame.height, "end"),
            (f"{frame.lat_max:.4f}", frame.x0 - 4, frame.y0 + 10, "end")):
        tick = ET.SubElement(parent, "text", {
            "x": _fmt(x), "y": _fmt(y), "text-anchor": anchor,
            "font-size": "9", "fill": "#555555",
        })
        tick.text = text


def _draw_track(parent, frame: _Frame, lats, lons, stroke: str, tag: str) -> None:
    pts = " ".join(f"{_fmt(frame.x(lo))},{_fmt(frame.y(la))}"
                   for la, lo in zip(lats, lons))
    ET.SubElement(parent, "polyline", {
        "points": pts, "fill": "none", "stroke": stroke,
        "stroke-width": "1.5", "class": f"track-{tag}",
    })
    sx, sy = frame.x(lons[0]), frame.y(lats[0])
    ex, ey = frame.x(lons[-1]), frame.y(lats[-1])
    ET.SubElement(parent, "circle", {
        "cx": _fmt(sx), "cy": _fmt(sy), "r": "4", "fill": stroke,
        "class": f"start-{tag}",
    })
    r = 4.0
    ET.SubElement(parent, "path", {
        "d": (f"M {_fmt(ex - r)} {_fmt(ey - r)} L {_fmt(ex + r)} {_fmt(ey + r)} "
              f"M {_fmt(ex - r)} {_fmt(ey + r)} L {_fmt(ex + r)} {_fmt(ey - r)}"),
        "stroke": stroke, "stroke-width": "1.5", "fill": "none",
        "class": f"end-{tag}",
    })


def _document(width: int, height: int) -> ET.Element:
    return ET.Element("svg", {
        "xmlns": SVG_NS, "version": "1.1",
        "width": str(width), "height": str(height),
        "viewBox": f"0 0 {width} {height}",
    })


def _render(root: ET.Element) -> str:
    return ('<?xml version="1.0" encoding="UTF-8"?>\n'
            + ET.tostring(root, encoding="unicode") + "\n")


def encounter_svg(enc: Encounter, width: int = 440, height: int = 440,
                  stroke_a: str = STROKE_A, stroke_b: str = STROKE_B) -> str:
    """One encounter as an SVG document string."""
    margin = 56
    lons = list(enc.traj_a.lon) + list(enc.traj_b.lon)
    lats = list(enc.traj_a.lat) + list(enc.traj_b.lat)
    frame = _Frame(lons, lats, margin, margin,
                   width - 2 * margin, height - 2 * margin)
    root = _document(width, height)
    title = ET.SubElement(root, "text", {
        "x": _fmt(width / 2), "y": "22", "text-anchor": "middle",
        "font-size": "13", "fill": "#000000",
    })
    title.text = enc.id if enc.label is None else f"{enc.id} [{enc.label}]"
    _axes(root, frame)
    _draw_track(root, frame, list(enc.traj_a.lat), list(enc.traj_a.lon), stroke_a, "a")
    _draw_track(root, frame, list(enc.traj_b.lat), list(enc.traj_b.lon), stroke_b, "b")
    return _render(root)


def cluster_grid_svg(encounters: Sequence[Encounter], title: str,
                     cols: int = 3, cell: int = 230, max_cells: int = 6,
                     stroke_a: str = STROKE_A, stroke_b: str = STROKE_B) -> str:
    """A grid of up to ``max_cells`` encounters from one cluster.

    An empty cluster still yields a valid document: an axes frame with an
    "empty" annotation.
    """
    shown = list(encounters)[:max_cells]
    n = max(len(shown), 1)
    cols = min(cols, n)
    rows = (n + cols - 1) // cols
    margin = 52
    width = cols * cell + 2 * margin
    height = rows * cell + 2 * margin + 16

    root = _document(width, height)
    head = ET.SubElement(root, "text", {
        "x": _fmt(width / 2), "y": "22", "text-anchor": "middle",
        "font-size": "13", "fill": "#000000",
    })
    head.text = title

    if not shown:
        frame = _Frame([0.0, 1.0], [0.0, 1.0], margin, margin + 16,
                       width - 2 * margin, height - 2 * margin - 16)
        _axes(root, frame)
        note = ET.SubElement(root, "text", {
            "x": _fmt(width / 2), "y": _fmt(height / 2), "text-anchor": "middle",
            "font-size": "12", "fill": "#888888", "class": "empty-note",
        })
        note.text = "empty"
        return _render(root)

    pad = 24
    for idx, enc in enumerate(shown):
        cx = margin + (idx % cols) * cell
        cy = margin + 16 + (idx // cols) * cell
        lons = list(enc.traj_a.lon) + list(enc.traj_b.lon)
        lats = list(enc.traj_a.lat) + list(enc.traj_b.lat)
        frame = _Frame(lons, lats, cx + pad, cy + pad, cell - 2 * pad, cell - 2 * pad)
        _axes(root, frame)
        _draw_track(root, frame, list(enc.traj_a.lat), list(enc.traj_a.lon),
                    stroke_a, "a")
        _draw_track(root, frame, list(enc.traj_b.lat), list(enc.traj_b.lon),
                    stroke_b, "b")
    return _render(root)
