"""Entry-fee (k+1)st-price auction: mechanism outcomes, iterated elimination
of weakly dominated strategies, implementation and bribe-stability checks."""

from .core import (AgentType, Allocation, BidGrid, Scenario, ScenarioError, belief_set,
                   build_bid_grid, choice_function, format_money, parse_money, payoff, top_set,
                   validate_scenario)
from .elimination import (ALL_WEAK, EliminationPolicy, check_implementation, eliminate_round,
                          is_weakly_dominated, iterate_elimination)
from .mechanisms import (AUCTION, NO, Strategy, get_mechanism, olszewski_outcome,
                         plain_auction_outcome, solomon_outcome)
from .stability import deviation_sum_search, olszewski_bribe_witness, verify_pairwise_stability

__version__ = "0.1.0"
