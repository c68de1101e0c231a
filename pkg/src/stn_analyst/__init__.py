"""Search Trajectory Network analysis with LLM-ready prompts.

Typical flow: load trajectories, optionally partition the solutions, build the
STN, extract per-algorithm features, render prompts, send them to a
chat-completions endpoint and score the replies.
"""

from .evaluation import Verdict, expected_label, parse_parameter_updates, parse_winner, run_trials
from .features import AlgorithmFeatures, extract_all
from .llm_client import ChatClient, LLMConfig, LLMReply
from .partitioning import ClusterLimits, PartitionConfig, cluster_limits, distance, partition
from .prompt_engine import RenderedPrompt, render_task_a, render_task_b, render_task_c
from .reporting import assemble_report, emit_task_c_csvs, render_grouped_bar
from .stn_graph import STN, build_stn, export_graph
from .trajectory_io import Dataset, load_dataset, parse_trajectory_file

__version__ = "0.1.0"
