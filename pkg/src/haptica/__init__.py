"""Desk-scale analysis suite for a large-force parallel linear haptic interface.

Core subpackages:

* ``mechanisms`` -- kinematics / Jacobians / inertia of the three compared
  2-DOF mechanisms.
* ``metrics`` -- directional force capability, reflected inertial force and
  haptic force density maps.
* ``stiffness`` -- belt-stretch vs. link-bending structural stiffness maps.
* ``actuator`` -- lumped and two-mass time-domain models of the modular
  linear actuator, plus frequency response.
* ``sysid`` -- chirp-based least-squares identification of the actuator.
* ``rendering`` -- sampled-data virtual-fixture rendering and the
  displayable-stiffness limit experiment.
* ``service`` / ``cli`` -- FastAPI front end and the thin command-line client.
"""

from . import actuator, mechanisms, metrics, rendering, stiffness, sysid

__all__ = ["actuator", "mechanisms", "metrics", "rendering", "stiffness", "sysid"]
__version__ = "0.1.0"
