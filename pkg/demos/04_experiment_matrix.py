# # Running the experiment matrix
#
# Writes a planted fixture with contextual files, generates a plan file, runs
# plans M1-M8 and an alpha sweep. Same as the CLI:
#   python3 -m ubli matrix --config <dir>/plans.ini --threads 4

import tempfile
from pathlib import Path

from ubli.experiments import (format_alpha_grid, format_table, load_config, planted_config, run_matrix,
                              sweep_alpha)
from ubli.synthetic import planted_contextual, planted_pair, write_fixture

work = Path(tempfile.mkdtemp(prefix="ubli_demo_"))
p = planted_pair(200, 16, noise=0.01, seed=0)
write_fixture(work, p, contextual=planted_contextual(p, 24, seed=0))
config = planted_config(work, codes=[f"M{i}" for i in range(1, 9)], stall_patience=10)
print(config.read_text())

plans = load_config(config)
rows = run_matrix(plans, work / "out", threads=4)
print(format_table(rows))
print("artifacts:", sorted(q.name for q in (work / "out" / "M1").iterdir()))

# ## Alpha sweep on M1
#
# The spaces are isometric, so unequal alphas give them different similarity
# orders and can break the alignment.

results = sweep_alpha(plans[0], grid=(-0.25, 0.0, 0.25), threads=4)
print(format_alpha_grid(results))
