

# ---- harness footer: writes the solution payload for verification ----
def __harness_emit():
    import json, os, sys
    result = find_points()
    try:
        points = [[float(p[0]), float(p[1])] for p in result]
        if any(len(p) != 2 for p in result):
            raise ValueError("every point needs exactly two coordinates")
    except Exception as exc:
        print(f"harness: cannot serialize find_points() result: {exc!r}", file=sys.stderr)
        return
    with open(os.environ["EVO_SOLUTION_PATH"], "w") as fh:
        json.dump({"points": points}, fh)


if __name__ == "__main__":
    __harness_emit()
