import numpy as np
import pytest

from ranimport.convergence import ConvergenceTable, ManufacturedProblem, run_convergence_study
from ranimport.dg import DgSpace
from ranimport.geometry import CellGeometry, build_disk_mesh
from ranimport.model import ModelParameters, microtubule_divergence, microtubule_velocity

G = CellGeometry()


@pytest.mark.parametrize("degree", [1, 2])
def test_compartment_constants_reproduced_to_machine_precision(degree):
    problem = ManufacturedProblem(cyto="2", nucleus="5", permeability=0.0)
    space = DgSpace(build_disk_mesh(G, 2.0, degree))
    assert problem.error(space, problem.solve(space)) < 1e-11


def test_exact_pair_with_interface_jump():
    # permeability couples two constants; boundary data keeps the problem consistent
    problem = ManufacturedProblem(cyto="2", nucleus="5", permeability=3.73)
    space = DgSpace(build_disk_mesh(G, 2.0, 1))
    assert problem.error(space, problem.solve(space)) < 1e-11


def test_linear_fields_exact_for_degree_one():
    problem = ManufacturedProblem(cyto="1 + 0.1*x - 0.2*y", nucleus="3 + 0.3*y")
    space = DgSpace(build_disk_mesh(G, 2.0, 1))
    assert problem.error(space, problem.solve(space)) < 1e-9


def test_needs_three_levels():
    with pytest.raises(ValueError):
        run_convergence_study(G, ManufacturedProblem(), 1, levels=2)


def test_rates_from_table():
    t = ConvergenceTable(1, [1.0, 0.5, 0.25], [1.0, 0.25, 0.0625])
    assert t.rates == pytest.approx([2.0, 2.0])
    assert "degree 1" in t.format()


def test_advective_problem_converges():
    p = ModelParameters()
    problem = ManufacturedProblem(velocity=lambda x: microtubule_velocity(x, p, G),
                                  divergence=lambda x: microtubule_divergence(x, p, G))
    table = run_convergence_study(G, problem, 1, levels=3, h0=1.0)
    assert table.rates[-1] >= 1.8
