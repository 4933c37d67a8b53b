from .oracle import ExplicitMDP, greedy_from, role_mdp, value_iteration_oracle
from .sankey import Flow, export_sankey, write_sankey_csv
from .scenario import RunReport, ScenarioSpec, load_scenario, run_scenario, scenario_from_dict, write_report
from .worlds import PipelineWorld, RandomWalkWorld, Task, WorldSpec

__all__ = [
    "ExplicitMDP",
    "Flow",
    "PipelineWorld",
    "RandomWalkWorld",
    "RunReport",
    "ScenarioSpec",
    "Task",
    "WorldSpec",
    "export_sankey",
    "greedy_from",
    "load_scenario",
    "role_mdp",
    "run_scenario",
    "scenario_from_dict",
    "value_iteration_oracle",
    "write_report",
    "write_sankey_csv",
]
