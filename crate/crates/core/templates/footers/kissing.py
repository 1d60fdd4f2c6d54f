

# ---- harness footer: writes the solution payload for verification ----
def __harness_emit():
    import json, os, sys

    def exact_int(x):
        if hasattr(x, "__index__"):
            return int(x.__index__())
        f = float(x)
        if not f.is_integer():
            raise ValueError(f"non-integer coordinate {x!r}")
        return int(f)

    result = kissing_vectors()
    try:
        vectors = [[exact_int(x) for x in v] for v in result]
    except Exception as exc:
        print(f"harness: cannot serialize kissing_vectors() result: {exc!r}", file=sys.stderr)
        return
    with open(os.environ["EVO_SOLUTION_PATH"], "w") as fh:
        json.dump({"vectors": vectors}, fh)


if __name__ == "__main__":
    __harness_emit()
