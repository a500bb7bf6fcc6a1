"""Independent reference for the parser golden files.

Re-implements PLT/Porto parsing, subsampling and cell assignment with the
Python standard library only, and writes the expected JSONL next to the
fixtures. Run from this directory: python3 make_golden.py
"""
import calendar
import csv
import json
import math
import os
from datetime import datetime

R = 6371008.8
M_PER_DEG = R * math.pi / 180.0

GEOLIFE = dict(lon_min=116.28, lon_max=116.32, lat_min=39.95, lat_max=40.0, g=99.383, sub=18, min_len=5, max_len=30)
PORTO = dict(lon_min=-8.70, lon_max=-8.55, lat_min=41.10, lat_max=41.20, g=148.957, sub=15, min_len=3, max_len=30)


def dumps(obj):
    return json.dumps(obj, separators=(",", ":"))


def plt_points(path):
    pts, skipped = [], 0
    with open(path) as f:
        lines = f.read().splitlines()[6:]
    for line in lines:
        if not line.strip():
            continue
        parts = [p.strip() for p in line.split(",")]
        try:
            lat, lon = float(parts[0]), float(parts[1])
            stamp = datetime.strptime(parts[5] + " " + parts[6], "%Y-%m-%d %H:%M:%S")
        except (ValueError, IndexError):
            skipped += 1
            continue
        pts.append({"lat": lat, "lon": lon, "t": calendar.timegm(stamp.timetuple())})
    return pts, skipped


def porto_trajs(path):
    out, missing, bad = [], 0, 0
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            if row["MISSING_DATA"].strip().lower() == "true":
                missing += 1
                continue
            try:
                start = int(row["TIMESTAMP"])
                pairs = json.loads(row["POLYLINE"])
            except ValueError:
                bad += 1
                continue
            pts = [{"lat": lat, "lon": lon, "t": start + 15 * i} for i, (lon, lat) in enumerate(pairs)]
            out.append({"id": row["TRIP_ID"], "points": pts})
    return out, missing, bad


def grid(c):
    lat_step = c["g"] / M_PER_DEG
    mid = math.radians((c["lat_min"] + c["lat_max"]) / 2.0)
    lon_step = c["g"] / (M_PER_DEG * math.cos(mid))
    n_rows = max(1, math.ceil((c["lat_max"] - c["lat_min"]) / lat_step - 1e-9))
    n_cols = max(1, math.ceil((c["lon_max"] - c["lon_min"]) / lon_step - 1e-9))
    return lat_step, lon_step, n_rows, n_cols


def preprocess(trajs, c):
    lat_step, lon_step, n_rows, n_cols = grid(c)
    inside = lambda p: c["lon_min"] <= p["lon"] <= c["lon_max"] and c["lat_min"] <= p["lat"] <= c["lat_max"]
    out = []
    for tr in trajs:
        segs, cur = [], []
        for p in tr["points"]:
            if not inside(p):
                if cur:
                    segs.append(cur)
                cur = []
                continue
            if cur and p["t"] < cur[-1]["t"] + c["sub"]:
                continue
            if cur and p["t"] - cur[-1]["t"] > 3 * c["sub"]:
                segs.append(cur)
                cur = [p]
                continue
            cur.append(p)
        if cur:
            segs.append(cur)
        pieces = []
        for s in segs:
            for i in range(0, len(s), c["max_len"]):
                piece = s[i:i + c["max_len"]]
                if len(piece) >= c["min_len"]:
                    pieces.append(piece)
        for k, piece in enumerate(pieces):
            pts = []
            for p in piece:
                row = min(int(math.floor((c["lat_max"] - p["lat"]) / lat_step)), n_rows - 1)
                col = min(int(math.floor((p["lon"] - c["lon_min"]) / lon_step)), n_cols - 1)
                pts.append([p["t"], row, col])
            tid = tr["id"] if len(pieces) == 1 else "%s_%d" % (tr["id"], k)
            out.append({"id": tid, "points": pts})
    return out


def write(name, items):
    with open(name, "w") as f:
        for it in items:
            f.write(dumps(it) + "\n")


def main():
    raw, skipped = [], 0
    root = "geolife"
    files = sorted(os.path.join(d, f) for d, _, fs in os.walk(root) for f in fs if f.lower().endswith(".plt"))
    for path in files:
        pts, s = plt_points(path)
        skipped += s
        raw.append({"id": os.path.splitext(os.path.relpath(path, root))[0].replace(os.sep, "/"), "points": pts})
    write("geolife_raw.golden.jsonl", raw)
    write("geolife_trajectories.golden.jsonl", preprocess(raw, GEOLIFE))
    print("geolife skipped rows:", skipped)

    trajs, missing, bad = porto_trajs("porto_sample.csv")
    write("porto_raw.golden.jsonl", trajs)
    write("porto_trajectories.golden.jsonl", preprocess(trajs, PORTO))
    print("porto missing:", missing, "malformed:", bad)


if __name__ == "__main__":
    main()
