

# ---- harness footer: writes the solution payload for verification ----
def __harness_emit():
    import json, os, sys
    result = hermite_coefficients()
    try:
        coefficients = [float(a) for a in result]
    except Exception as exc:
        print(f"harness: cannot serialize hermite_coefficients() result: {exc!r}", file=sys.stderr)
        return
    with open(os.environ["EVO_SOLUTION_PATH"], "w") as fh:
        json.dump({"coefficients": coefficients, "basis": "probabilist"}, fh)


if __name__ == "__main__":
    __harness_emit()
