"""Decision policies: uniform random, the expert rule agent, and the fixed
default rules for Travel and DeclareAttackers that every agent shares.

Policies expose decide(state, legals, rng) -> Action. A policy whose
needs_legals attribute is False constructs its action analytically and is
handed legals=None by the driver; such policies still guarantee membership
in the enumerated legal family (the expert checks the family caps through
the engine's cap predicates instead of enumerating).

AgentKind is the parsed description of an agent (used by the CLI and the
experiment harness); the search-backed kinds are instantiated in search.py.
"""

from __future__ import annotations

from dataclasses import dataclass
from random import Random
from typing import Protocol

from .cards import CardKind, Sphere
from .engine import MAX_COMMIT_ENUM, defend_capped, planning_capped, single_card_payable
from .errors import ConfigError, StageError
from .state import (
    Action,
    Attack,
    Commit,
    Defend,
    GameState,
    PlayCards,
    StageId,
    TravelTo,
    Zone,
)

# The expert's standout purchase; a card set without it simply never
# triggers the rule.
GANDALF_ID = "gandalf"

_CHARS = frozenset({CardKind.HERO, CardKind.ALLY})


class DecisionPolicy(Protocol):
    needs_legals: bool

    def decide(self, state: GameState, legals: list[Action] | None,
               rng: Random) -> Action: ...


# ---- random agent -----------------------------------------------------------


def random_decide(state: GameState, legals: list[Action], rng: Random) -> Action:
    """Uniform choice over the enumerated legal actions."""
    return legals[rng.randrange(len(legals))]


class RandomPolicy:
    needs_legals = True

    def decide(self, state: GameState, legals: list[Action],
               rng: Random) -> Action:
        return random_decide(state, legals, rng)


# ---- fixed default rules ----------------------------------------------------


def default_travel(state: GameState, legals: list[Action] | None = None) -> Action:
    """Travel to the staging location with the highest threat (ties by id);
    stay put when a location is already active or none are staged."""
    if state.active_location() is not None:
        return TravelTo(None)
    locations = [c for c in state.cards
                 if c.zone is Zone.STAGING_AREA and c.defn.kind is CardKind.LOCATION]
    if not locations:
        return TravelTo(None)
    best = min(locations, key=lambda c: (-c.defn.threat, c.instance_id))
    return TravelTo(best.instance_id)


def default_attack(state: GameState, legals: list[Action] | None = None) -> Action:
    """All ready characters attack the engaged enemy with the fewest
    remaining hit points (ties by id); empty when nothing to do."""
    enemies = state.engaged_enemies()
    ready = state.ready_characters()
    if not enemies or not ready:
        return Attack(())
    target = min(enemies, key=lambda e: (e.remaining_hp, e.instance_id))
    return Attack(((target.instance_id, tuple(c.instance_id for c in ready)),))


class FixedTravelPolicy:
    needs_legals = False

    def decide(self, state: GameState, legals, rng: Random) -> Action:
        return default_travel(state)


class FixedAttackPolicy:
    needs_legals = False

    def decide(self, state: GameState, legals, rng: Random) -> Action:
        return default_attack(state)


# ---- expert agent -----------------------------------------------------------


def _expert_planning(state: GameState) -> Action:
    """Greedy purchase loop: Gandalf whenever affordable, then affordable
    Spirit cards by descending willpower, then the cheapest affordable card;
    ties by card id, repeated until nothing else is affordable."""
    hand = state.hand()
    pools: dict[Sphere, int] = {}
    total_pool = 0
    for hero in state.heroes():
        pools[hero.defn.sphere] = pools.get(hero.defn.sphere, 0) + hero.resource_pool
        total_pool += hero.resource_pool

    demand: dict[Sphere, int] = {}
    spent = 0
    chosen: list[int] = []
    chosen_set: set[int] = set()

    def fits(d) -> bool:
        if spent + d.cost > total_pool:
            return False
        return (d.sphere is Sphere.NEUTRAL
                or demand.get(d.sphere, 0) + d.cost <= pools.get(d.sphere, 0))

    while True:
        afford = [c for c in hand
                  if c.instance_id not in chosen_set and fits(c.defn)]
        if not afford:
            break
        gandalfs = [c for c in afford if c.defn.id == GANDALF_ID]
        if gandalfs:
            pick = gandalfs[0]
        else:
            spirit = [c for c in afford if c.defn.sphere is Sphere.SPIRIT]
            if spirit:
                pick = min(spirit, key=lambda c: (-c.defn.willpower, c.defn.id,
                                                  c.instance_id))
            else:
                pick = min(afford, key=lambda c: (c.defn.cost, c.defn.id,
                                                  c.instance_id))
        chosen.append(pick.instance_id)
        chosen_set.add(pick.instance_id)
        spent += pick.defn.cost
        if pick.defn.sphere is not Sphere.NEUTRAL:
            demand[pick.defn.sphere] = (demand.get(pick.defn.sphere, 0)
                                        + pick.defn.cost)

    if len(chosen) >= 2 and planning_capped(state):
        # Capped family carries only singletons: keep the first ideal card
        # (in legal order) that is payable on its own.
        for c in hand:
            if c.instance_id in chosen_set and single_card_payable(state, c):
                return PlayCards((c.instance_id,))
        return PlayCards(())
    return PlayCards(tuple(chosen))


def _expert_commit(state: GameState) -> Action:
    """Commit Gandalf then Spirit characters by descending willpower until
    total willpower strictly exceeds the staging threat; empty commit when
    that is unreachable."""
    threshold = state.staging_threat()
    pool = [c for c in state.ready_characters()
            if not c.committed and c.willpower > 0]
    preferred = ([c for c in pool if c.defn.id == GANDALF_ID]
                 + sorted((c for c in pool
                           if c.defn.sphere is Sphere.SPIRIT
                           and c.defn.id != GANDALF_ID),
                          key=lambda c: (-c.willpower, c.instance_id)))
    chosen: list[int] = []
    total = 0
    for c in preferred:
        chosen.append(c.instance_id)
        total += c.willpower
        if total > threshold:
            break
    if total <= threshold:
        return Commit(())

    if len(pool) > MAX_COMMIT_ENUM:
        # Capped family carries only willpower-descending prefixes of the
        # whole pool: take the largest prefix inside the ideal set, or the
        # shortest qualifying prefix when the ideal set is not a prefix.
        chosen_set = set(chosen)
        ordered = sorted(pool, key=lambda c: (-c.willpower, c.instance_id))
        best: tuple[int, ...] = ()
        prefix: list[int] = []
        run = 0
        for c in ordered:
            if c.instance_id not in chosen_set:
                break
            prefix.append(c.instance_id)
            run += c.willpower
            if run > threshold:
                best = tuple(prefix)
        if not best:
            prefix.clear()
            run = 0
            for c in ordered:
                prefix.append(c.instance_id)
                run += c.willpower
                if run > threshold:
                    return Commit(tuple(prefix))
        return Commit(best)
    return Commit(tuple(chosen))


def _expert_defend(state: GameState) -> Action:
    """Defend the hardest-hitting enemies first, spending ready allies by
    ascending cost before heroes by descending defense; leftover enemies go
    undefended."""
    enemies = sorted(state.engaged_enemies(),
                     key=lambda e: (-e.attack, e.instance_id))
    ready = state.ready_characters()
    queue = (sorted((c for c in ready if c.defn.kind is CardKind.ALLY),
                    key=lambda c: (c.defn.cost, c.instance_id))
             + sorted((c for c in ready if c.defn.kind is CardKind.HERO),
                      key=lambda c: (-c.defense, c.instance_id)))
    ideal: dict[int, int | None] = {}
    for i, enemy in enumerate(enemies):
        ideal[enemy.instance_id] = (queue[i].instance_id
                                    if i < len(queue) else None)

    if defend_capped(state):
        # Capped family: all-undefended plus single-defender assignments,
        # enemies outer / characters inner, so keep the first ideal pair.
        engaged_ids = sorted(ideal)
        for eid in engaged_ids:
            did = ideal[eid]
            if did is not None:
                return Defend(tuple((e, did if e == eid else None)
                                    for e in engaged_ids))
        return Defend(tuple((e, None) for e in engaged_ids))
    return Defend(tuple(ideal.items()))


def expert_decide(state: GameState, legals: list[Action] | None = None,
                  rng: Random | None = None) -> Action:
    """Deterministic rule agent; ignores legals and rng (the construction
    itself stays inside the enumerated family, caps included)."""
    stage = state.stage
    if stage is StageId.PLANNING:
        return _expert_planning(state)
    if stage is StageId.COMMIT_CHARACTERS:
        return _expert_commit(state)
    if stage is StageId.DECLARE_DEFENDERS:
        return _expert_defend(state)
    if stage is StageId.TRAVEL:
        return default_travel(state)
    if stage is StageId.DECLARE_ATTACKERS:
        return default_attack(state)
    raise StageError(f"'{stage.value}' is not a decision stage")


class ExpertPolicy:
    needs_legals = False

    def decide(self, state: GameState, legals, rng: Random) -> Action:
        return expert_decide(state)


# ---- agent descriptions -----------------------------------------------------


@dataclass(frozen=True)
class AgentKind:
    """Parsed agent description: random, expert, flat:<budget>:<playout> or
    mcts:<budget>:<C>:<playout>."""

    kind: str  # "random" | "expert" | "flat" | "mcts"
    budget: int | None = None
    exploration_c: float | None = None
    playout: str | None = None

    def __post_init__(self):
        if self.kind not in ("random", "expert", "flat", "mcts"):
            raise ConfigError(f"unknown agent kind '{self.kind}'")
        if self.kind in ("flat", "mcts"):
            if self.budget is None or self.budget < 1:
                raise ConfigError(f"agent '{self.kind}': budget must be >= 1, "
                                  f"got {self.budget}")
            if self.playout not in ("random", "expert"):
                raise ConfigError(f"agent '{self.kind}': playout must be "
                                  f"'random' or 'expert', got {self.playout!r}")
        if self.kind == "mcts":
            if self.exploration_c is None or not 0.0 <= self.exploration_c <= 1.0:
                raise ConfigError(f"agent 'mcts': exploration constant must lie "
                                  f"in [0, 1], got {self.exploration_c}")

    @property
    def is_search(self) -> bool:
        return self.kind in ("flat", "mcts")

    @property
    def number(self) -> int:
        """Compact numeric label: 1 random, 2 expert, 3 flat, 4 mcts."""
        return ("random", "expert", "flat", "mcts").index(self.kind) + 1

    def with_budget(self, budget: int) -> "AgentKind":
        if not self.is_search:
            return self
        return AgentKind(self.kind, budget, self.exploration_c, self.playout)

    def __str__(self) -> str:
        if self.kind == "flat":
            return f"flat:{self.budget}:{self.playout}"
        if self.kind == "mcts":
            return f"mcts:{self.budget}:{self.exploration_c:g}:{self.playout}"
        return self.kind


RANDOM_AGENT = AgentKind("random")
EXPERT_AGENT = AgentKind("expert")


def parse_agent(token: str) -> AgentKind:
    """Parse a compact agent string; raises ConfigError naming the token."""
    parts = token.strip().split(":")
    head = parts[0]
    try:
        if head in ("random", "expert"):
            if len(parts) != 1:
                raise ConfigError(f"agent '{head}' takes no parameters")
            return AgentKind(head)
        if head == "flat":
            if len(parts) != 3:
                raise ConfigError("expected flat:<budget>:<playout>")
            return AgentKind("flat", budget=int(parts[1]), playout=parts[2])
        if head == "mcts":
            if len(parts) != 4:
                raise ConfigError("expected mcts:<budget>:<C>:<playout>")
            return AgentKind("mcts", budget=int(parts[1]),
                             exploration_c=float(parts[2]), playout=parts[3])
        raise ConfigError(f"unknown agent kind '{head}'")
    except ValueError as exc:
        raise ConfigError(f"bad agent string '{token}': {exc}") from exc
    except ConfigError as exc:
        raise ConfigError(f"bad agent string '{token}': {exc}") from exc


@dataclass(frozen=True)
class StagePolicyMap:
    """Agent assignment for the three configurable decision stages; Travel
    always uses the fixed rule and DeclareAttackers uses the fixed rule
    unless overridden with an mcts agent."""

    planning: AgentKind
    commit: AgentKind
    defense: AgentKind
    attack: AgentKind | None = None

    def __post_init__(self):
        if self.attack is not None and self.attack.kind != "mcts":
            raise ConfigError("the attack stage can only be overridden with "
                              f"an mcts agent, got '{self.attack}'")

    def agents(self) -> dict[str, AgentKind]:
        out = {"planning": self.planning, "commit": self.commit,
               "defense": self.defense}
        if self.attack is not None:
            out["attack"] = self.attack
        return out

    def replace(self, **kw) -> "StagePolicyMap":
        cur = {"planning": self.planning, "commit": self.commit,
               "defense": self.defense, "attack": self.attack}
        cur.update(kw)
        return StagePolicyMap(**cur)

    def with_budget(self, budget: int) -> "StagePolicyMap":
        return StagePolicyMap(self.planning.with_budget(budget),
                              self.commit.with_budget(budget),
                              self.defense.with_budget(budget),
                              self.attack.with_budget(budget)
                              if self.attack is not None else None)

    def has_search_agent(self) -> bool:
        return any(kind.is_search for kind in self.agents().values())

    def triple_label(self) -> str:
        """Numeric planning-commit-defense label, e.g. '4-2-4'."""
        return f"{self.planning.number}-{self.commit.number}-{self.defense.number}"

    def __str__(self) -> str:
        return ";".join(f"{stage}={kind}" for stage, kind in self.agents().items())


STAGE_KEYS = {"planning": StageId.PLANNING,
              "commit": StageId.COMMIT_CHARACTERS,
              "defense": StageId.DECLARE_DEFENDERS,
              "attack": StageId.DECLARE_ATTACKERS}


def parse_policy_map(text: str) -> StagePolicyMap:
    """Parse 'planning=A,commit=B,defense=C[,attack=D]' agent assignments."""
    fields: dict[str, AgentKind] = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ConfigError(f"bad agent assignment '{part}', "
                              f"expected stage=agent")
        stage, _, token = part.partition("=")
        stage = stage.strip()
        if stage not in STAGE_KEYS:
            raise ConfigError(f"unknown stage '{stage}', expected one of "
                              f"{sorted(STAGE_KEYS)}")
        if stage in fields:
            raise ConfigError(f"stage '{stage}' assigned twice")
        fields[stage] = parse_agent(token)
    for stage in ("planning", "commit", "defense"):
        if stage not in fields:
            raise ConfigError(f"missing agent for stage '{stage}' in '{text}'")
    return StagePolicyMap(planning=fields["planning"], commit=fields["commit"],
                          defense=fields["defense"], attack=fields.get("attack"))
