"""GLIDE: cooperative UAV-UGV search-and-rescue simulator and benchmark."""

from .agents import (ScoutPolicy, UavLimits, UavState, UgvLimits, UgvState,
                     scout_target, survey_waypoints, uav_step, ugv_step)
from .bench import (AggregateRow, ScenarioSuite, aggregate_rows, check_trends,
                    emit_tables, run_suite, suite_from_toml)
from .comms import Link, LinkModel, LinkStatus, OutboundQueue, link_state
from .mapping import (FREE, OCCUPIED, UNKNOWN, OccupancyBelief, OutOfBounds,
                      RevealFootprint, UnknownPolicy, apply_local_window,
                      apply_reveal, is_traversable, new_belief, save_pgm)
from .perception import (CameraIntrinsics, ConfirmedVictim, ConsensusTracker,
                         DetectionEvent, NoGroundIntersection, RawDetection,
                         UavPose, attitude_gate, center_gate, consensus_update,
                         decode_event, encode_event, project_to_ground,
                         simulate_detection)
from .planner import (AllUnreachable, DegenerateRay, Goal, HeuristicParams,
                      Infeasible, Plan, PoseState, delta_theta, heuristic,
                      heuristic_cost, needs_replan, order_goals, plan_path,
                      project_goal)
from .sim import (GLIDE, GT, LOCAL, SETTINGS, ConfigError, ReplanHistory,
                  TrialConfig, TrialResult, detect_immobilized, run_trial)
from .worldgen import (EASY, HARD, DifficultyLevel, GenerationFailed,
                       GroundTruthGrid, Obstacle, WorldSpec, generate_world,
                       rasterize)

__version__ = "0.1.0"
