"""Conductivity reconstruction from boundary electrode data.

The package solves the complete electrode model with P1 finite elements
on disk and cylinder meshes and recovers an interior conductivity map by
projected gradient descent on a misfit summed over cyclic rotations of
the boundary voltage vector.
"""

from .fem import (ConductivityField, FemSystem, FemWorkspace, SolveError, adjoint_solve,
                  assemble_system, boundary_integral, forward_solve, simulated_currents,
                  unit_solves)
from .gpm import (GpmConfig, GpmResult, GpmState, IterationRecord, project_conductivity,
                  project_voltage, run_gpm, save_history, should_stop)
from .gradients import (Gradient, StepHistory, bb_step_sizes, conductivity_gradient,
                        initial_step_sizes, voltage_gradient)
from .measurements import (MeasurementSet, Pattern, VoltageFit, electrode_currents,
                           fit_voltages, generate_measurements, load_measurements,
                           response_matrix, save_measurements, zero_mean_basis)
from .mesh import (ElectrodeLayout, Mesh, generate_cylinder_mesh, generate_disk_mesh,
                   load_mesh, place_electrodes_2d, place_electrodes_3d, save_mesh)
from .objective import CostBreakdown, evaluate_cost, rotate_pattern, rotation_slot
from .scenario import (Inclusion, Phantom, Scenario, ScenarioConfig, Stage1Result,
                       alternating_pattern, build_scenario, load_field, parse_config,
                       rasterize_phantom, run_stage1, run_stage2, serialize_config,
                       weighted_l2_error)

__version__ = "0.1.0"
