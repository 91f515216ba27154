#!/usr/bin/env python3
"""Rebuild data/adult.csv (Adult Census Income, 48,842 rows) from the copy
bundled in the pytorch-widedeep wheel. Only needs pip + pandas + pyarrow."""
import io
import pathlib
import subprocess
import sys
import tempfile
import zipfile

import pandas as pd

OUT = pathlib.Path(__file__).resolve().parent.parent / "data" / "adult.csv"


def main() -> int:
    with tempfile.TemporaryDirectory() as tmp:
        subprocess.check_call([sys.executable, "-m", "pip", "download", "--no-deps", "-q",
                               "pytorch-widedeep==1.7.0", "-d", tmp])
        wheel = next(pathlib.Path(tmp).glob("*.whl"))
        raw = zipfile.ZipFile(wheel).read("pytorch_widedeep/datasets/data/adult.parquet.brotli")
    df = pd.read_parquet(io.BytesIO(raw))
    df["income"] = (df["income"].str.strip().str.rstrip(".") == ">50K").astype(int)
    for col in df.columns:
        if df[col].dtype == object:
            df[col] = df[col].str.strip()
    OUT.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(OUT, index=False)
    print(f"wrote {OUT} ({len(df)} rows)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
