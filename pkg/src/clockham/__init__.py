"""clockham: quantum computations as the dynamics of fixed local Hamiltonians.

Subpackages cover sparse Hermitian linear algebra (`linalg`), a small circuit
IR with bit-flip error-correction circuits (`circuit`), perfect-state-transfer
coupling design (`transfer`), clock Hamiltonians and history states (`clock`),
the implicit-clock qutrit lattice (`lattice`), and the topological-condition
experiments with energy penalties (`fault`). The `clockham` CLI exposes each
experiment as a subcommand.
"""
from ._kernels import BACKEND as kernel_backend

__version__ = "0.1.0"

__all__ = ["kernel_backend", "__version__"]
