"""
The command-line pipeline
=========================

gen -> train -> filter -> eval, driven through ``ecbf.cli.main`` so the
script runs anywhere. The same steps from a shell::

    ecbf gen --count 10000 --seed 42 --out legit.csv
    ecbf gen --count 10000 --seed 42 --append attack-random=10000 --out mixed.csv
    ecbf train --in legit.csv --profile profile.json
    ecbf filter --in mixed.csv --profile profile.json --periods periods.csv \\
        --out decisions.csv --rewrite tagged.pcap
    ecbf eval --decisions decisions.csv --report report.json
"""

import json
import tempfile
from pathlib import Path

from ecbf.cli import main

work = Path(tempfile.mkdtemp(prefix="ecbf-demo-"))
main(["gen", "--count", "10000", "--seed", "42", "--out", str(work / "legit.csv")])
main(["gen", "--count", "10000", "--seed", "42", "--append", "attack-random=10000",
      "--out", str(work / "mixed.csv")])
(work / "periods.csv").write_text("start_ts,end_ts,period\n0,10,nonattack\n10,20,attack\n")
main(["train", "--in", str(work / "legit.csv"), "--profile", str(work / "profile.json")])
main(["filter", "--in", str(work / "mixed.csv"), "--profile", str(work / "profile.json"),
      "--periods", str(work / "periods.csv"), "--out", str(work / "decisions.csv"),
      "--rewrite", str(work / "tagged.pcap")])
main(["eval", "--decisions", str(work / "decisions.csv"), "--report", str(work / "report.json")])

report = json.loads((work / "report.json").read_text())
print(json.dumps(report["counts"], indent=1))
print("histogram CSV:", work / "report.hist.csv")
