from .evaluate import (
    EvalRecord, SOLVERS, SolverMismatchError, evaluate, make_solver, optimality_gap, solver_problem, summarize,
    write_records_csv, write_summary_csv,
)
from .formats import (
    ParseError, data_dir, format_taillard, format_tsplib, load_best_known, load_taillard_set, parse_taillard,
    parse_tsplib, read_instance, tsplib_instance, write_instance,
)
from .generate import gen_random_jsp, gen_random_mtsp
