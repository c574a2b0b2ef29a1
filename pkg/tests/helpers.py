"""Shared test fixtures: a small synthetic card pool with hand-checkable
numbers, plus surgery helpers for building precise game states."""

from random import Random

from questsim.cards import parse_card_db, parse_scenario
from questsim.engine import new_game
from questsim.state import CardInstance, GameState, StageId, Zone

# Three heroes, one per sphere; starting threat 9 + 10 + 10 = 29.
SYNTH_CARDS = {
    "cards": [
        {"id": "hero-star", "name": "Star", "kind": "hero", "sphere": "spirit",
         "threat_cost": 9, "willpower": 4, "attack": 1, "defense": 1,
         "hit_points": 3},
        {"id": "hero-crown", "name": "Crown", "kind": "hero",
         "sphere": "leadership", "threat_cost": 10, "willpower": 2,
         "attack": 2, "defense": 2, "hit_points": 5},
        {"id": "hero-axe", "name": "Axe", "kind": "hero", "sphere": "tactics",
         "threat_cost": 10, "willpower": 1, "attack": 3, "defense": 2,
         "hit_points": 4},

        {"id": "ally-lantern", "name": "Lantern Bearer", "kind": "ally",
         "sphere": "spirit", "cost": 1, "willpower": 1, "attack": 0,
         "defense": 0, "hit_points": 1},
        {"id": "ally-banner", "name": "Banner Guard", "kind": "ally",
         "sphere": "leadership", "cost": 2, "willpower": 1, "attack": 1,
         "defense": 1, "hit_points": 2},
        {"id": "ally-shield", "name": "Shield Bearer", "kind": "ally",
         "sphere": "tactics", "cost": 2, "willpower": 0, "attack": 1,
         "defense": 2, "hit_points": 2},
        {"id": "ally-porter", "name": "Porter", "kind": "ally",
         "sphere": "neutral", "cost": 1, "willpower": 1, "attack": 0,
         "defense": 0, "hit_points": 1},
        {"id": "gandalf", "name": "Gandalf", "kind": "ally",
         "sphere": "neutral", "cost": 4, "willpower": 4, "attack": 4,
         "defense": 4, "hit_points": 4},

        {"id": "item-blade", "name": "Blade", "kind": "item",
         "sphere": "tactics", "cost": 1, "buff": "attack"},
        {"id": "item-charm", "name": "Charm", "kind": "item",
         "sphere": "spirit", "cost": 1, "buff": "willpower"},
        {"id": "item-pack", "name": "Pack", "kind": "item",
         "sphere": "neutral", "cost": 1, "buff": "hit_points"},

        {"id": "event-respite", "name": "Respite", "kind": "event-player",
         "sphere": "spirit", "cost": 1, "effect": "reduce_threat",
         "effect_amount": 2},

        {"id": "enemy-wolf", "name": "Wolf", "kind": "enemy", "threat": 1,
         "engagement_cost": 15, "attack": 2, "defense": 0, "hit_points": 2,
         "shadow_attack_bonus": 1},
        {"id": "enemy-warg", "name": "Warg", "kind": "enemy", "threat": 2,
         "engagement_cost": 25, "attack": 3, "defense": 1, "hit_points": 4,
         "shadow_attack_bonus": 0},
        {"id": "enemy-troll", "name": "Troll", "kind": "enemy", "threat": 3,
         "engagement_cost": 34, "attack": 4, "defense": 2, "hit_points": 6,
         "shadow_attack_bonus": 2},

        {"id": "loc-clearing", "name": "Clearing", "kind": "location",
         "threat": 1, "quest_points": 2, "shadow_attack_bonus": 0},
        {"id": "loc-ridge", "name": "Ridge", "kind": "location", "threat": 2,
         "quest_points": 3, "shadow_attack_bonus": 1},

        {"id": "enc-alarm", "name": "Alarm", "kind": "event-encounter",
         "effect": "raise_threat", "effect_amount": 2,
         "shadow_attack_bonus": 1},
        {"id": "enc-ambush", "name": "Ambush", "kind": "event-encounter",
         "effect": "damage_committed", "effect_amount": 1,
         "shadow_attack_bonus": 2},

        {"id": "quest-setout", "name": "Set Out", "kind": "quest",
         "quest_points": 6},
        {"id": "quest-deepen", "name": "Deepen", "kind": "quest",
         "quest_points": 8},
        {"id": "quest-confront", "name": "Confront", "kind": "quest",
         "quest_points": 10},
    ]
}

SYNTH_SCENARIO = {
    "name": "testlands",
    "quest_line": ["quest-setout", "quest-deepen", "quest-confront"],
    "heroes": ["hero-star", "hero-crown", "hero-axe"],
    "player_deck": {
        "ally-lantern": 4, "ally-banner": 3, "ally-shield": 3,
        "ally-porter": 3, "gandalf": 1, "item-blade": 2, "item-charm": 2,
        "event-respite": 2,
    },
    "encounter_decks": {
        "test": {
            "enemy-wolf": 4, "enemy-warg": 3, "enemy-troll": 2,
            "loc-clearing": 2, "loc-ridge": 2, "enc-alarm": 2,
            "enc-ambush": 1,
        },
    },
    "threat_limit": 50,
}


def make_db():
    return parse_card_db(SYNTH_CARDS)


def make_scenario(**overrides):
    obj = dict(SYNTH_SCENARIO)
    obj.update(overrides)
    return parse_scenario(obj, make_db())


def new_synth_game(seed=0, scenario=None):
    return new_game(scenario or make_scenario(), "test", Random(seed))


def put(state: GameState, card_id: str, zone: Zone, **attrs) -> CardInstance:
    """Append a fresh instance of card_id in the given zone (test surgery)."""
    inst = CardInstance(len(state.cards), state.scenario.db[card_id], zone)
    state.cards.append(inst)
    if zone is Zone.PLAYER_DECK:
        state.player_deck.append(inst.instance_id)
    elif zone is Zone.ENCOUNTER_DECK:
        state.encounter_deck.append(inst.instance_id)
    for name, value in attrs.items():
        setattr(inst, name, value)
    return inst


def stash_hand(state: GameState) -> None:
    """Return every hand card to the bottom of the player deck."""
    for c in state.hand():
        c.zone = Zone.PLAYER_DECK
        state.player_deck.insert(0, c.instance_id)


def at_stage(state: GameState, stage: StageId) -> GameState:
    state.stage = stage
    return state


def by_id(state: GameState, card_id: str, zone: Zone | None = None):
    """All instances of a card id, optionally filtered by zone."""
    return [c for c in state.cards if c.defn.id == card_id
            and (zone is None or c.zone is zone)]
