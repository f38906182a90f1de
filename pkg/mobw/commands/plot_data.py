from typing import ClassVar

import numpy as np

from ..config import Command, RunConfig
from ..inference import empirical_jumps, fitted_min_cdf
from .analyze import fit_pooled, fit_posterior
from .base import BaseCommand, CommandResult


class PlotDataCommand(BaseCommand):
    """Empirical and fitted CDF of the minimum lifetime at every jump of the empirical CDF."""

    name: ClassVar[Command] = Command.PLOT_DATA
    description: ClassVar[str] = "export empirical and fitted CDF columns for plotting"

    async def __call__(self, cfg: RunConfig) -> CommandResult:
        d = self.load(cfg)
        rng = np.random.default_rng(cfg.seed)
        _, report = fit_posterior(cfg, d, rng)
        jumps = empirical_jumps(d.times)
        header = ["t", "empirical_cdf", "fitted_cdf"]
        fitted = fitted_min_cdf(jumps.t, report)
        files = [self.write_csv(cfg, "cdf.csv", header, zip(jumps.t, jumps.after, np.atleast_1d(fitted)))]
        output = f"{jumps.t.size} jump points; fitted alpha={report.params.shape:.4f} lambda={report.params.lambda_total:.4f}"
        if cfg.pooled:
            pooled, _ = fit_pooled(cfg, d, rng)
            pooled_cdf = np.atleast_1d(fitted_min_cdf(jumps.t, pooled.params))
            files.append(self.write_csv(cfg, "cdf_pooled.csv", header, zip(jumps.t, jumps.after, pooled_cdf)))
            output += f"\npooled alpha*={pooled.alpha:.4f} lambda*={pooled.lam:.4f}"
        files.append(self.write_manifest(cfg))
        return CommandResult(output=output, files=tuple(files))
