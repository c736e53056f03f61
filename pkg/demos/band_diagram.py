"""Band diagram of the uniform strip from the command line driver.

Runs the sweep subcommand over omega2 in [0.5, 4.5] and prints how many real
quasi-momenta exist at each frequency.  Bands open at omega2 = kappa_n^2,
i.e. at 1 and 4.
"""

import csv
import tempfile
from pathlib import Path

from floquet_waveguide.cli import main

here = Path(__file__).parent
with tempfile.TemporaryDirectory() as out:
    main(["--config", str(here / "configs" / "band_diagram.yaml"), "--out", out, "--subcommand", "sweep", "--jobs", "2"])
    rows = list(csv.DictReader(open(Path(out) / "sweep.csv")))

for r in rows:
    bar = "#" * int(r["n_real"])
    print(f"omega2 = {float(r['value']):4.1f}  real modes {r['n_real']}  decay {float(r['decay_rate']):.4f}  {bar}")
