import logging
from functools import cached_property
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from cflow.configs.base import RunConfig
from cflow.energy.functional import energy_report
from cflow.exceptions import ConfigError
from cflow.flow.runner import FlowResult, run_flow
from cflow.flow.state import FlowState
from cflow.geometry.curvature import bianchi_defect, hypothesis_report
from cflow.geometry.metric import MetricField
from cflow.grid.lattice import Grid4
from cflow.maps.map_field import MapField
from cflow.maps.samples import fourier_mode
from cflow.target.base import SpaceForm
from cflow.utils.expression import evaluate_on_grid, parse as parse_expression
from cflow.utils.factory import TargetFactory

logger = logging.getLogger(__name__)


class CFlowClient:
    """
    High-level interface: builds the scenario (grid, metric, target, u₀) from a
    RunConfig and runs the invariants / energy / flow / check pipelines on it.
    """

    def __init__(self, config: RunConfig):
        self.config = config

    # ------------------------------------------------------------- scenario -- #
    @cached_property
    def grid(self) -> Grid4:
        return Grid4(tuple(self.config.grid.dims), tuple(self.config.grid.lengths))

    @cached_property
    def metric(self) -> MetricField:
        mc = self.config.metric
        if mc.kind == "flat":
            return MetricField.flat(self.grid, mc.diagonal)
        phi = evaluate_on_grid(parse_expression(mc.phi), self.grid)
        return MetricField.conformally_flat(self.grid, phi, mc.diagonal)

    @cached_property
    def target(self) -> SpaceForm:
        return TargetFactory.create(self.config.target.kind, self.config.target)

    @cached_property
    def initial_map(self) -> MapField:
        im, n = self.config.initial_map, self.target.n
        if im.kind == "constant":
            return MapField.constant(self.grid, self.target, im.offset)
        linear = np.zeros((n, 4), dtype=np.int64) if im.linear_part is None else np.asarray(im.linear_part)
        u = MapField.affine(self.grid, self.target, linear, im.offset)
        if im.kind == "affine":
            return u
        disp = np.array(u.disp)
        for m in im.modes:
            disp[..., m.component] += m.amplitude * fourier_mode(self.grid, m.as_vector(), m.phase)
        return u.with_disp(disp)

    # ------------------------------------------------------------ pipelines -- #
    def invariants(self) -> Dict[str, Any]:
        report = hypothesis_report(self.metric)
        report["bianchi_defect"] = bianchi_defect(self.metric)
        report["volume"]         = self.metric.volume()
        return report

    def energy(self) -> Dict[str, float]:
        return energy_report(self.initial_map, self.metric).to_dict()

    def flow(self, on_record: Optional[Callable] = None,
             on_snapshot: Optional[Callable[[FlowState], None]] = None) -> FlowResult:
        if self.config.flow is None:
            raise ConfigError("the 'flow' command needs a 'flow' section in the config", field="flow")
        return run_flow(self.initial_map, self.metric, self.config.flow,
                        on_record=on_record, on_snapshot=on_snapshot)

    def check(self) -> List:
        from cflow.checks.suite import run_checks
        return run_checks(self)
