from .analyze import AnalyzeCommand
from .base import BaseCommand, CommandFailure, CommandResult
from .bf_test import BayesFactorCommand
from .collection import CommandCollection
from .plot_data import PlotDataCommand
from .simulate import SimulateCommand

__all__ = [
    "AnalyzeCommand",
    "BaseCommand",
    "BayesFactorCommand",
    "CommandCollection",
    "CommandFailure",
    "CommandResult",
    "PlotDataCommand",
    "SimulateCommand",
]


def default_commands() -> CommandCollection:
    return CommandCollection(AnalyzeCommand(), SimulateCommand(), BayesFactorCommand(), PlotDataCommand())
