"""Game state: stages, zones, card instances, actions and snapshots.

A round is a fixed pipeline of 13 stages grouped into 7 phases. Six stages
are ruled (pure rule application), two are random (they consume the injected
RNG) and five are decision stages where an agent picks an Action. The engine
in engine.py advances this state; nothing here touches an RNG.

GameState.clone() is the deep snapshot used for playouts: the clone shares
only immutable objects (CardDef, Scenario) with the original.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .cards import CardDef, CardKind, Scenario


class StageKind(Enum):
    RULED = "ruled"
    RANDOM = "random"
    DECISION = "decision"


class StageId(Enum):
    GAIN_RESOURCES_AND_DRAW = "gain-resources"
    PLANNING = "planning"
    COMMIT_CHARACTERS = "commit"
    STAGING = "staging"
    QUEST_RESOLUTION = "quest-resolution"
    TRAVEL = "travel"
    ENGAGEMENT_CHECKS = "engagement"
    DEAL_SHADOW_CARDS = "deal-shadows"
    DECLARE_DEFENDERS = "declare-defenders"
    RESOLVE_ENEMY_ATTACKS = "enemy-attacks"
    DECLARE_ATTACKERS = "declare-attackers"
    RESOLVE_PLAYER_ATTACKS = "player-attacks"
    REFRESH = "refresh"

    @property
    def kind(self) -> StageKind:
        return _STAGE_KIND[self]

    @property
    def phase(self) -> str:
        return _STAGE_PHASE[self]


# Pipeline order; REFRESH wraps back to GAIN_RESOURCES_AND_DRAW with a new round.
STAGE_ORDER: tuple[StageId, ...] = (
    StageId.GAIN_RESOURCES_AND_DRAW,
    StageId.PLANNING,
    StageId.COMMIT_CHARACTERS,
    StageId.STAGING,
    StageId.QUEST_RESOLUTION,
    StageId.TRAVEL,
    StageId.ENGAGEMENT_CHECKS,
    StageId.DEAL_SHADOW_CARDS,
    StageId.DECLARE_DEFENDERS,
    StageId.RESOLVE_ENEMY_ATTACKS,
    StageId.DECLARE_ATTACKERS,
    StageId.RESOLVE_PLAYER_ATTACKS,
    StageId.REFRESH,
)

_STAGE_KIND = {
    StageId.GAIN_RESOURCES_AND_DRAW: StageKind.RULED,
    StageId.PLANNING: StageKind.DECISION,
    StageId.COMMIT_CHARACTERS: StageKind.DECISION,
    StageId.STAGING: StageKind.RANDOM,
    StageId.QUEST_RESOLUTION: StageKind.RULED,
    StageId.TRAVEL: StageKind.DECISION,
    StageId.ENGAGEMENT_CHECKS: StageKind.RULED,
    StageId.DEAL_SHADOW_CARDS: StageKind.RANDOM,
    StageId.DECLARE_DEFENDERS: StageKind.DECISION,
    StageId.RESOLVE_ENEMY_ATTACKS: StageKind.RULED,
    StageId.DECLARE_ATTACKERS: StageKind.DECISION,
    StageId.RESOLVE_PLAYER_ATTACKS: StageKind.RULED,
    StageId.REFRESH: StageKind.RULED,
}

_STAGE_PHASE = {
    StageId.GAIN_RESOURCES_AND_DRAW: "resource",
    StageId.PLANNING: "planning",
    StageId.COMMIT_CHARACTERS: "quest",
    StageId.STAGING: "quest",
    StageId.QUEST_RESOLUTION: "quest",
    StageId.TRAVEL: "travel",
    StageId.ENGAGEMENT_CHECKS: "encounter",
    StageId.DEAL_SHADOW_CARDS: "combat",
    StageId.DECLARE_DEFENDERS: "combat",
    StageId.RESOLVE_ENEMY_ATTACKS: "combat",
    StageId.DECLARE_ATTACKERS: "combat",
    StageId.RESOLVE_PLAYER_ATTACKS: "combat",
    StageId.REFRESH: "refresh",
}

_NEXT_STAGE = {s: STAGE_ORDER[(i + 1) % len(STAGE_ORDER)] for i, s in enumerate(STAGE_ORDER)}

DECISION_STAGES: tuple[StageId, ...] = tuple(
    s for s in STAGE_ORDER if s.kind is StageKind.DECISION)


def next_stage(stage: StageId) -> StageId:
    return _NEXT_STAGE[stage]


class Zone(Enum):
    PLAYER_DECK = "player_deck"
    HAND = "hand"
    PLAY_AREA = "play_area"
    STAGING_AREA = "staging_area"
    ENCOUNTER_DECK = "encounter_deck"
    ENGAGEMENT_AREA = "engagement_area"
    ACTIVE_LOCATION = "active_location"
    PLAYER_DISCARD = "player_discard"
    ENCOUNTER_DISCARD = "encounter_discard"
    COMPLETED_QUESTS = "completed_quests"


class Outcome(Enum):
    WIN = "win"
    LOSS_THREAT = "loss-threat"
    LOSS_HEROES_DEAD = "loss-heroes-dead"
    LOSS_DECK_EMPTY = "loss-deck-empty"


class CardInstance:
    """Mutable in-game state of one physical card.

    willpower/attack/defense/hit_points are the effective stats (printed
    stats plus item buffs), kept as plain attributes because search playouts
    read them millions of times; buffs records the accumulated item bonuses
    as a (willpower, attack, defense, hit_points) tuple. Shadow cards dealt
    to an engaged enemy keep zone ENGAGEMENT_AREA and point back at their
    enemy through attached_to; that mark excludes them from "engaged enemy"
    queries.
    """

    __slots__ = ("instance_id", "defn", "zone", "damage", "progress", "exhausted",
                 "resource_pool", "committed", "shadow_card", "attached_to", "buffs",
                 "willpower", "attack", "defense", "hit_points")

    def __init__(self, instance_id: int, defn: CardDef, zone: Zone):
        self.instance_id = instance_id
        self.defn = defn
        self.zone = zone
        self.damage = 0
        self.progress = 0
        self.exhausted = False
        self.resource_pool = 0
        self.committed = False
        self.shadow_card: int | None = None
        self.attached_to: int | None = None
        self.buffs: tuple[int, int, int, int] | None = None
        self.willpower = defn.willpower
        self.attack = defn.attack
        self.defense = defn.defense
        self.hit_points = defn.hit_points

    def copy(self) -> "CardInstance":
        c = CardInstance.__new__(CardInstance)
        c.instance_id = self.instance_id
        c.defn = self.defn
        c.zone = self.zone
        c.damage = self.damage
        c.progress = self.progress
        c.exhausted = self.exhausted
        c.resource_pool = self.resource_pool
        c.committed = self.committed
        c.shadow_card = self.shadow_card
        c.attached_to = self.attached_to
        c.buffs = self.buffs
        c.willpower = self.willpower
        c.attack = self.attack
        c.defense = self.defense
        c.hit_points = self.hit_points
        return c

    @property
    def remaining_hp(self) -> int:
        return self.hit_points - self.damage

    def add_buff(self, stat: str) -> None:
        b = list(self.buffs) if self.buffs else [0, 0, 0, 0]
        b[("willpower", "attack", "defense", "hit_points").index(stat)] += 1
        self.buffs = (b[0], b[1], b[2], b[3])
        setattr(self, stat, getattr(self, stat) + 1)

    def reset_in_game_state(self) -> None:
        """Clear transient state, e.g. when a card is shuffled back into a deck."""
        self.damage = 0
        self.progress = 0
        self.exhausted = False
        self.resource_pool = 0
        self.committed = False
        self.shadow_card = None
        self.attached_to = None
        self.buffs = None
        self.willpower = self.defn.willpower
        self.attack = self.defn.attack
        self.defense = self.defn.defense
        self.hit_points = self.defn.hit_points

    def __repr__(self) -> str:
        return f"<{self.defn.id}#{self.instance_id} {self.zone.value}>"


class GameState:
    """Full snapshot of one game.

    cards is indexed by instance_id and never grows or shrinks after setup.
    player_deck / encounter_deck hold instance ids in draw order (top = last
    element). defense_map / attack_map carry combat declarations from the
    declaration stage to the matching resolution stage within a round.
    """

    __slots__ = ("round_no", "stage", "threat_level", "quest_index", "quest_progress",
                 "cards", "scenario", "difficulty", "outcome", "player_deck",
                 "encounter_deck", "quest_ids", "defense_map", "attack_map")

    def __init__(self, scenario: Scenario, difficulty: str):
        self.round_no = 1
        self.stage = StageId.GAIN_RESOURCES_AND_DRAW
        self.threat_level = 0
        self.quest_index = 0
        self.quest_progress = 0
        self.cards: list[CardInstance] = []
        self.scenario = scenario
        self.difficulty = difficulty
        self.outcome: Outcome | None = None
        self.player_deck: list[int] = []
        self.encounter_deck: list[int] = []
        self.quest_ids: tuple[int, int, int] = (0, 0, 0)
        self.defense_map: dict[int, int] = {}
        self.attack_map: dict[int, tuple[int, ...]] = {}

    def clone(self) -> "GameState":
        s = GameState.__new__(GameState)
        s.round_no = self.round_no
        s.stage = self.stage
        s.threat_level = self.threat_level
        s.quest_index = self.quest_index
        s.quest_progress = self.quest_progress
        s.cards = [c.copy() for c in self.cards]
        s.scenario = self.scenario
        s.difficulty = self.difficulty
        s.outcome = self.outcome
        s.player_deck = list(self.player_deck)
        s.encounter_deck = list(self.encounter_deck)
        s.quest_ids = self.quest_ids
        s.defense_map = dict(self.defense_map)
        s.attack_map = dict(self.attack_map)
        return s

    # ---- zone and role queries (always in instance-id order) ----

    def in_zone(self, zone: Zone) -> list[CardInstance]:
        return [c for c in self.cards if c.zone is zone]

    def hand(self) -> list[CardInstance]:
        return [c for c in self.cards if c.zone is Zone.HAND]

    def heroes(self) -> list[CardInstance]:
        """Surviving heroes (in play)."""
        return [c for c in self.cards
                if c.defn.kind is CardKind.HERO and c.zone is Zone.PLAY_AREA]

    def characters_in_play(self) -> list[CardInstance]:
        return [c for c in self.cards
                if c.zone is Zone.PLAY_AREA and c.defn.kind in _CHARACTER_KINDS]

    def ready_characters(self) -> list[CardInstance]:
        return [c for c in self.cards
                if c.zone is Zone.PLAY_AREA and not c.exhausted
                and c.defn.kind in _CHARACTER_KINDS]

    def committed_characters(self) -> list[CardInstance]:
        return [c for c in self.cards if c.committed]

    def shadow_id_set(self) -> set[int]:
        return {c.shadow_card for c in self.cards if c.shadow_card is not None}

    def engaged_enemies(self) -> list[CardInstance]:
        # Shadow cards also sit in ENGAGEMENT_AREA but carry the attached_to
        # mark of their enemy, so one pass suffices.
        return [c for c in self.cards
                if c.zone is Zone.ENGAGEMENT_AREA and c.attached_to is None
                and c.defn.kind is CardKind.ENEMY]

    def staging_threat(self) -> int:
        return sum(c.defn.threat for c in self.cards if c.zone is Zone.STAGING_AREA)

    def active_location(self) -> CardInstance | None:
        for c in self.cards:
            if c.zone is Zone.ACTIVE_LOCATION:
                return c
        return None

    def current_quest(self) -> CardInstance:
        return self.cards[self.quest_ids[self.quest_index]]

    @property
    def threat_limit(self) -> int:
        return self.scenario.threat_limit

    def fingerprint(self) -> tuple:
        """Hashable deep identity of the state, for determinism checks."""
        return (
            self.round_no, self.stage, self.threat_level, self.quest_index,
            self.quest_progress, self.outcome, self.difficulty,
            tuple(self.player_deck), tuple(self.encounter_deck),
            tuple(sorted(self.defense_map.items())),
            tuple(sorted(self.attack_map.items())),
            tuple((c.defn.id, c.zone, c.damage, c.progress, c.exhausted,
                   c.resource_pool, c.committed, c.shadow_card, c.attached_to, c.buffs)
                  for c in self.cards),
        )

    def __repr__(self) -> str:
        return (f"<GameState r{self.round_no} {self.stage.value} "
                f"threat={self.threat_level} quest={self.quest_index + 1}"
                f"+{self.quest_progress} outcome={self.outcome}>")


_CHARACTER_KINDS = frozenset({CardKind.HERO, CardKind.ALLY})


# ---- actions ----------------------------------------------------------------
#
# Actions are immutable, hashable and canonically ordered so that equal
# decisions compare equal regardless of how they were built.


@dataclass(frozen=True)
class PlayCards:
    """Planning: buy this set of hand cards (may be empty)."""
    cards: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "cards", tuple(sorted(self.cards)))


@dataclass(frozen=True)
class Commit:
    """Commit these characters to the quest (may be empty)."""
    characters: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "characters", tuple(sorted(self.characters)))


@dataclass(frozen=True)
class TravelTo:
    """Travel to a staging-area location, or nowhere."""
    location: int | None = None


@dataclass(frozen=True)
class Defend:
    """Assign at most one ready defender per engaged enemy.

    assignments lists every engaged enemy exactly once as
    (enemy_id, defender_id or None), sorted by enemy id.
    """
    assignments: tuple[tuple[int, int | None], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "assignments", tuple(sorted(self.assignments)))


@dataclass(frozen=True)
class Attack:
    """Partition attacking characters over engaged enemies.

    assignments lists only enemies that are attacked, as
    (enemy_id, sorted attacker ids), sorted by enemy id.
    """
    assignments: tuple[tuple[int, tuple[int, ...]], ...] = ()

    def __post_init__(self):
        norm = tuple(sorted((e, tuple(sorted(group))) for e, group in self.assignments))
        object.__setattr__(self, "assignments", norm)


Action = PlayCards | Commit | TravelTo | Defend | Attack

ACTION_STAGE: dict[type, StageId] = {
    PlayCards: StageId.PLANNING,
    Commit: StageId.COMMIT_CHARACTERS,
    TravelTo: StageId.TRAVEL,
    Defend: StageId.DECLARE_DEFENDERS,
    Attack: StageId.DECLARE_ATTACKERS,
}


def describe_action(action: Action, state: GameState) -> str:
    """Compact human-readable action text for trace logs."""
    def name(iid: int) -> str:
        return state.cards[iid].defn.id

    if isinstance(action, PlayCards):
        return "play=[" + ",".join(name(i) for i in action.cards) + "]"
    if isinstance(action, Commit):
        return "commit=[" + ",".join(name(i) for i in action.characters) + "]"
    if isinstance(action, TravelTo):
        return f"travel={name(action.location) if action.location is not None else 'none'}"
    if isinstance(action, Defend):
        parts = [f"{name(e)}<-{name(d) if d is not None else 'none'}"
                 for e, d in action.assignments]
        return "defend=[" + ",".join(parts) + "]"
    if isinstance(action, Attack):
        parts = [f"{name(e)}<-{'+'.join(name(a) for a in group)}"
                 for e, group in action.assignments]
        return "attack=[" + ",".join(parts) + "]"
    raise TypeError(f"not an action: {action!r}")
