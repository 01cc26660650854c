from . import analytic, diagnostics, figures, generator, regime, spectral, sweep

__all__ = ["analytic", "diagnostics", "figures", "generator", "regime", "spectral", "sweep"]
