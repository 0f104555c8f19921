"""Pin linear algebra to one thread before numpy is first imported.

Keeps the acceptance runs on a single CPU core and makes float
reductions bit-reproducible across runs on the same machine.
"""

import os

for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(var, "1")
