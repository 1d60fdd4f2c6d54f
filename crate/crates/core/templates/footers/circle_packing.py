

# ---- harness footer: writes the solution payload for verification ----
def __harness_emit():
    import json, os, sys
    result = pack_circles()
    try:
        centers, radii = result[0], result[1]
        circles = [[float(c[0]), float(c[1]), float(r)] for c, r in zip(centers, radii)]
        if len(circles) != len(centers) or len(circles) != len(radii):
            raise ValueError("centers and radii differ in length")
    except Exception as exc:
        print(f"harness: cannot serialize pack_circles() result: {exc!r}", file=sys.stderr)
        return
    with open(os.environ["EVO_SOLUTION_PATH"], "w") as fh:
        json.dump({"circles": circles}, fh)


if __name__ == "__main__":
    __harness_emit()
