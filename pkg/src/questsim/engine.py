"""Rules engine: setup, legal moves, stage execution and the game driver.

The public stage functions (apply_action, advance_ruled_stage,
resolve_random_stage) are functional: they clone the state, mutate the clone
and return it. The driver and the search code use the private *_inplace
variants to skip the clone on hot paths; both share the same stage handlers.

RNG discipline: only new_game, resolve_random_stage and the agents consume
the injected random.Random. Ruled stages and action application never touch
an RNG, so replaying the same seeds and decisions reproduces a game exactly.
"""

from __future__ import annotations

import math
import time
from random import Random
from typing import Callable

from .cards import CardKind, Scenario, Sphere, expand_deck
from .errors import DataError, IllegalActionError, QuestSimError, StageError
from .state import (
    ACTION_STAGE,
    Action,
    Attack,
    CardInstance,
    Commit,
    Defend,
    GameState,
    Outcome,
    PlayCards,
    StageId,
    StageKind,
    TravelTo,
    Zone,
    describe_action,
    next_stage,
)

STARTING_HAND_SIZE = 6

# Legal-action family caps. Planning is capped at 64 subsets; when the cap
# would be exceeded the family falls back to a smaller canonical family so
# decision stages never explode combinatorially.
MAX_PLANNING_ACTIONS = 64
MAX_COMMIT_ENUM = 7
MAX_DEFEND_ACTIONS = 512
MAX_ATTACK_ACTIONS = 512

_CHARS = frozenset({CardKind.HERO, CardKind.ALLY})


# ---- setup ------------------------------------------------------------------


def new_game(scenario: Scenario, difficulty: str, rng: Random) -> GameState:
    """Set up a fresh game: heroes in play, quest line staged, decks shuffled,
    starting threat equal to the summed hero threat costs, 6 cards drawn.

    Instance ids are assigned in a fixed order (heroes, quests, player deck,
    encounter deck); the player deck is shuffled before the encounter deck.
    """
    db = scenario.db
    deck_multiset = scenario.encounter_deck(difficulty)
    state = GameState(scenario, difficulty)
    cards = state.cards

    def add(card_id: str, zone: Zone) -> int:
        inst = CardInstance(len(cards), db[card_id], zone)
        cards.append(inst)
        return inst.instance_id

    for cid in scenario.heroes:
        add(cid, Zone.PLAY_AREA)
    state.quest_ids = tuple(add(cid, Zone.STAGING_AREA) for cid in scenario.quest_line)

    player = [add(cid, Zone.PLAYER_DECK) for cid in expand_deck(scenario.player_deck)]
    encounter = [add(cid, Zone.ENCOUNTER_DECK) for cid in expand_deck(deck_multiset)]
    if len(player) < STARTING_HAND_SIZE:
        raise DataError(f"player deck has {len(player)} cards, "
                        f"needs at least {STARTING_HAND_SIZE}")
    rng.shuffle(player)
    rng.shuffle(encounter)
    state.player_deck = player
    state.encounter_deck = encounter

    state.threat_level = sum(db[cid].threat_cost for cid in scenario.heroes)
    if state.threat_level >= scenario.threat_limit:
        state.outcome = Outcome.LOSS_THREAT

    for _ in range(STARTING_HAND_SIZE):
        iid = state.player_deck.pop()
        cards[iid].zone = Zone.HAND
    return state


# ---- shared helpers ---------------------------------------------------------


def _instance(state: GameState, iid: object) -> CardInstance:
    if not isinstance(iid, int) or not 0 <= iid < len(state.cards):
        raise IllegalActionError(f"unknown instance id {iid!r}")
    return state.cards[iid]


def _raise_threat(state: GameState, amount: int) -> None:
    state.threat_level += amount
    if state.threat_level >= state.scenario.threat_limit:
        state.threat_level = state.scenario.threat_limit
        state.outcome = Outcome.LOSS_THREAT


def _destroy(state: GameState, card: CardInstance, log: list | None) -> None:
    if log is not None:
        log.append(f"{card.defn.id} destroyed")
    if card.defn.kind in _CHARS:
        # Attached items go to the discard pile with their bearer.
        for item in state.cards:
            if item.attached_to == card.instance_id:
                item.reset_in_game_state()
                item.zone = Zone.PLAYER_DISCARD
        was_hero = card.defn.kind is CardKind.HERO
        card.reset_in_game_state()
        card.zone = Zone.PLAYER_DISCARD
        if was_hero and not state.heroes():
            state.outcome = Outcome.LOSS_HEROES_DEAD
    else:
        if card.shadow_card is not None:
            shadow = state.cards[card.shadow_card]
            shadow.reset_in_game_state()
            shadow.zone = Zone.ENCOUNTER_DISCARD
        card.reset_in_game_state()
        card.zone = Zone.ENCOUNTER_DISCARD


def _deal_damage(state: GameState, card: CardInstance, amount: int,
                 log: list | None) -> None:
    if amount <= 0:
        return
    card.damage += amount
    if log is not None:
        log.append(f"{card.defn.id} takes {amount}")
    if card.damage >= card.hit_points:
        _destroy(state, card, log)


def _add_progress(state: GameState, points: int, log: list | None) -> None:
    """Quest progress: an active location soaks points until explored, the
    rest goes to the current quest; completed quests roll overflow forward
    and finishing the third quest wins the game (quest_index parks at 3)."""
    location = state.active_location()
    if location is not None:
        need = location.defn.quest_points - location.progress
        if points < need:
            location.progress += points
            return
        points -= need
        location.reset_in_game_state()
        location.zone = Zone.ENCOUNTER_DISCARD
        if log is not None:
            log.append(f"{location.defn.id} explored")
    state.quest_progress += points
    while state.quest_progress >= state.current_quest().defn.quest_points:
        state.quest_progress -= state.current_quest().defn.quest_points
        quest = state.current_quest()
        quest.zone = Zone.COMPLETED_QUESTS
        if log is not None:
            log.append(f"{quest.defn.id} completed")
        state.quest_index += 1
        if state.quest_index > 2:
            state.outcome = Outcome.WIN
            return


def _draw_encounter(state: GameState, rng: Random) -> int | None:
    """Top of the encounter deck, reshuffling the discard pile in (cards are
    reset when reshuffled). None when both are empty."""
    if not state.encounter_deck:
        pile = [c.instance_id for c in state.cards
                if c.zone is Zone.ENCOUNTER_DISCARD]
        if not pile:
            return None
        for iid in pile:
            card = state.cards[iid]
            card.reset_in_game_state()
            card.zone = Zone.ENCOUNTER_DECK
        rng.shuffle(pile)
        state.encounter_deck = pile
    return state.encounter_deck.pop()


def _resource_pools(heroes: list[CardInstance]) -> tuple[dict[Sphere, int], int]:
    pools: dict[Sphere, int] = {}
    total = 0
    for hero in heroes:
        pools[hero.defn.sphere] = pools.get(hero.defn.sphere, 0) + hero.resource_pool
        total += hero.resource_pool
    return pools, total


def _payment_problem(defs) -> tuple[dict[Sphere, int], int]:
    demand: dict[Sphere, int] = {}
    total = 0
    for d in defs:
        total += d.cost
        if d.sphere is not Sphere.NEUTRAL:
            demand[d.sphere] = demand.get(d.sphere, 0) + d.cost
    return demand, total


def _payable(heroes: list[CardInstance], defs) -> tuple[bool, str]:
    """Exact affordability: sphere cards draw only on same-sphere heroes,
    neutral cards on anyone, so a set is payable iff every per-sphere demand
    fits its sphere pool and the grand total fits the grand pool."""
    pools, total_pool = _resource_pools(heroes)
    demand, total = _payment_problem(defs)
    for sphere in sorted(demand, key=lambda s: s.value):
        if demand[sphere] > pools.get(sphere, 0):
            return False, (f"needs {demand[sphere]} {sphere.value} resources, "
                           f"heroes have {pools.get(sphere, 0)}")
    if total > total_pool:
        return False, f"costs {total} in total, heroes have {total_pool}"
    return True, ""


def _spend(heroes: list[CardInstance], amount: int) -> None:
    for hero in heroes:
        take = min(hero.resource_pool, amount)
        hero.resource_pool -= take
        amount -= take
        if amount == 0:
            return


# ---- legal action families --------------------------------------------------


def _planning_enumerate(state: GameState,
                        build: bool) -> tuple[list[Action] | None, bool]:
    """Walk payable hand subsets depth-first, stopping as soon as the
    64-action cap is exceeded. Built actions come out in depth-first hand
    order (subsets led by earlier hand cards first, supersets before their
    remainders) with the empty buy last; see legal_actions for why the
    order matters. With build=False only the overflow flag is computed
    (same traversal, no action objects)."""
    hand = state.hand()
    pools, total_pool = _resource_pools(state.heroes())

    subsets: list[tuple[int, tuple[int, ...]]] | None = [] if build else None
    chosen: list[int] = []
    demand: dict[Sphere, int] = {}
    running = [1, 0]  # action count (incl. empty), cost of chosen subset
    overflow = [False]

    def fits(d) -> bool:
        if running[1] + d.cost > total_pool:
            return False
        return (d.sphere is Sphere.NEUTRAL
                or demand.get(d.sphere, 0) + d.cost <= pools.get(d.sphere, 0))

    def dfs(start: int) -> None:
        for i in range(start, len(hand)):
            if overflow[0]:
                return
            d = hand[i].defn
            if not fits(d):
                continue
            chosen.append(hand[i].instance_id)
            running[1] += d.cost
            if d.sphere is not Sphere.NEUTRAL:
                demand[d.sphere] = demand.get(d.sphere, 0) + d.cost
            running[0] += 1
            if build:
                subsets.append((running[1], tuple(chosen)))
            if running[0] > MAX_PLANNING_ACTIONS:
                overflow[0] = True
            else:
                dfs(i + 1)
            chosen.pop()
            running[1] -= d.cost
            if d.sphere is not Sphere.NEUTRAL:
                demand[d.sphere] -= d.cost

    dfs(0)
    if not build:
        return None, overflow[0]
    actions = [PlayCards(ids) for _, ids in subsets]
    actions.append(PlayCards(()))
    return actions, overflow[0]


def planning_capped(state: GameState) -> bool:
    """True when the payable-subset family overflows the 64-action cap and
    Planning legals collapse to the empty buy plus payable singletons."""
    return _planning_enumerate(state, build=False)[1]


def defend_capped(state: GameState) -> bool:
    """True when the defender-assignment family overflows its cap and
    DeclareDefenders legals collapse to all-undefended plus single-defender
    assignments."""
    k = len(state.engaged_enemies())
    n = len(state.ready_characters())
    count = sum(math.comb(k, j) * math.perm(n, j) for j in range(min(k, n) + 1))
    return count > MAX_DEFEND_ACTIONS


def single_card_payable(state: GameState, card: CardInstance) -> bool:
    """Whether this hand card alone is payable from current hero pools."""
    pools, total_pool = _resource_pools(state.heroes())
    d = card.defn
    if d.cost > total_pool:
        return False
    return d.sphere is Sphere.NEUTRAL or d.cost <= pools.get(d.sphere, 0)


def _planning_actions(state: GameState) -> list[Action]:
    """Every payable subset of the hand, capped at 64 actions; over the cap
    the family collapses to payable singletons plus the empty buy. Subsets
    come out in depth-first hand order with the empty buy last."""
    actions, overflow = _planning_enumerate(state, build=True)
    if overflow:
        payable = [c for c in state.hand() if single_card_payable(state, c)]
        payable.sort(key=lambda c: (-c.defn.cost, c.instance_id))
        return [PlayCards((c.instance_id,)) for c in payable] + [PlayCards(())]
    return actions


def _commit_actions(state: GameState) -> list[Action]:
    """Every subset of ready, uncommitted, nonzero willpower characters
    whose willpower strictly beats the staging threat, plus the empty
    commit. Ordered by ascending willpower (tightest qualifying commit
    first) with the empty commit last; past 7 candidates only
    willpower-descending prefixes are offered."""
    threshold = state.staging_threat()
    pool = [c for c in state.ready_characters() if not c.committed and c.willpower > 0]

    if len(pool) > MAX_COMMIT_ENUM:
        ordered = sorted(pool, key=lambda c: (-c.willpower, c.instance_id))
        actions = []
        ids: list[int] = []
        total = 0
        for c in ordered:
            ids.append(c.instance_id)
            total += c.willpower
            if total > threshold:
                actions.append(Commit(tuple(ids)))
        actions.append(Commit(()))
        return actions

    wills = [c.willpower for c in pool]
    ids = [c.instance_id for c in pool]
    m = len(pool)
    sums = [0] * (1 << m)
    qualifying: list[tuple[int, tuple[int, ...]]] = []
    for mask in range(1, 1 << m):
        low = mask & -mask
        sums[mask] = sums[mask ^ low] + wills[low.bit_length() - 1]
        if sums[mask] > threshold:
            qualifying.append((sums[mask],
                               tuple(ids[b] for b in range(m) if mask >> b & 1)))
    qualifying.sort()
    actions = [Commit(subset) for _, subset in qualifying]
    actions.append(Commit(()))
    return actions


def _travel_actions(state: GameState) -> list[Action]:
    actions: list[Action] = []
    if state.active_location() is None:
        spots = [c for c in state.cards if c.zone is Zone.STAGING_AREA
                 and c.defn.kind is CardKind.LOCATION]
        spots.sort(key=lambda c: (-c.defn.threat, c.instance_id))
        actions.extend(TravelTo(c.instance_id) for c in spots)
    actions.append(TravelTo(None))
    return actions


def _defend_actions(state: GameState) -> list[Action]:
    """Every assignment of at most one distinct ready defender per engaged
    enemy; above 512 assignments only the single-defender assignments plus
    all-undefended are offered. Assignments are ordered fullest-first (most
    enemies blocked first; cheap-allies-then-heroes preference within a
    tier) with all-undefended always last."""
    enemies = [e.instance_id for e in state.engaged_enemies()]
    ready = sorted(state.ready_characters(),
                   key=lambda c: ((0, c.defn.cost, c.instance_id)
                                  if c.defn.kind is CardKind.ALLY
                                  else (1, -c.defense, c.instance_id)))
    chars = [c.instance_id for c in ready]
    k, n = len(enemies), len(chars)
    count = sum(math.comb(k, j) * math.perm(n, j) for j in range(min(k, n) + 1))

    if count > MAX_DEFEND_ACTIONS:
        actions = []
        for e in enemies:
            for c in chars:
                actions.append(Defend(tuple((e2, c if e2 == e else None)
                                            for e2 in enemies)))
        actions.append(Defend(tuple((e, None) for e in enemies)))
        return actions

    built: list[tuple[int, int, Action]] = []
    assign: list[tuple[int, int | None]] = []
    used: set[int] = set()

    def rec(i: int, blocked: int) -> None:
        if i == k:
            built.append((blocked, len(built), Defend(tuple(assign))))
            return
        enemy = enemies[i]
        for c in chars:
            if c in used:
                continue
            used.add(c)
            assign.append((enemy, c))
            rec(i + 1, blocked + 1)
            assign.pop()
            used.remove(c)
        assign.append((enemy, None))
        rec(i + 1, blocked)
        assign.pop()

    rec(0, 0)
    # Fullest assignments first, preference order within a tier, with the
    # all-undefended action always last.
    built.sort(key=lambda t: (t[0] == 0, -t[0], t[1]))
    return [a for _, _, a in built]


def _attack_actions(state: GameState) -> list[Action]:
    """Every mapping of ready characters to an engaged enemy or to abstaining;
    above 512 mappings only the all-in-on-one-enemy options and the no-attack
    are offered. Enemies are tried weakest (lowest remaining hit points)
    first and the no-attack action always comes last."""
    targets = sorted(state.engaged_enemies(),
                     key=lambda e: (e.remaining_hp, e.instance_id))
    enemies = [e.instance_id for e in targets]
    chars = [c.instance_id for c in state.ready_characters()]
    k, n = len(enemies), len(chars)
    if k == 0 or n == 0:
        return [Attack(())]

    if (k + 1) ** n > MAX_ATTACK_ACTIONS:
        everyone = tuple(chars)
        return [Attack(((e, everyone),)) for e in enemies] + [Attack(())]

    actions: list[Action] = []
    pick: list[int | None] = [None] * n

    def rec(i: int) -> None:
        if i == n:
            groups: dict[int, list[int]] = {}
            for c, e in zip(chars, pick):
                if e is not None:
                    groups.setdefault(e, []).append(c)
            actions.append(Attack(tuple((e, tuple(g)) for e, g in groups.items())))
            return
        for e in enemies:
            pick[i] = e
            rec(i + 1)
        pick[i] = None
        rec(i + 1)

    rec(0)
    return actions


_LEGAL: dict[StageId, Callable[[GameState], list[Action]]] = {
    StageId.PLANNING: _planning_actions,
    StageId.COMMIT_CHARACTERS: _commit_actions,
    StageId.TRAVEL: _travel_actions,
    StageId.DECLARE_DEFENDERS: _defend_actions,
    StageId.DECLARE_ATTACKERS: _attack_actions,
}


def legal_actions(state: GameState) -> list[Action]:
    """Canonically ordered legal actions for the current decision stage.

    Never empty: each family contains its minimal action (pass, empty buy,
    empty commit...). Each family has a fixed deterministic order - buys in
    depth-first hand order, tightest qualifying commit first, fullest
    defense first, all-in attack first - with the pass action last. Search
    code treats this order as a move-ordering prior, so it is part of the
    contract. Raises StageError off decision stages or after the end.
    """
    if state.outcome is not None:
        raise StageError("game is over, no legal actions")
    gen = _LEGAL.get(state.stage)
    if gen is None:
        raise StageError(f"'{state.stage.value}' is not a decision stage")
    return gen(state)


# ---- action application -----------------------------------------------------


def _do_play(state: GameState, action: PlayCards, log: list | None) -> None:
    if len(set(action.cards)) != len(action.cards):
        raise IllegalActionError("duplicate card in buy")
    insts = []
    for iid in action.cards:
        inst = _instance(state, iid)
        if inst.zone is not Zone.HAND:
            raise IllegalActionError(f"{inst.defn.id}#{iid} is not in hand")
        insts.append(inst)
    heroes = state.heroes()
    ok, why = _payable(heroes, [i.defn for i in insts])
    if not ok:
        raise IllegalActionError(f"cannot pay for {[i.defn.id for i in insts]}: {why}")

    # Sphere costs drain matching heroes (id order) before neutral costs
    # drain anyone, so paying never strands a sphere requirement.
    for inst in insts:
        if inst.defn.sphere is not Sphere.NEUTRAL:
            _spend([h for h in heroes if h.defn.sphere is inst.defn.sphere],
                   inst.defn.cost)
    for inst in insts:
        if inst.defn.sphere is Sphere.NEUTRAL:
            _spend(heroes, inst.defn.cost)

    for inst in insts:
        kind = inst.defn.kind
        if kind is CardKind.ALLY:
            inst.zone = Zone.PLAY_AREA
            if log is not None:
                log.append(f"played {inst.defn.id}")
        elif kind is CardKind.ITEM:
            inst.zone = Zone.PLAY_AREA
            target = next((h for h in heroes
                           if h.defn.sphere is inst.defn.sphere), heroes[0])
            inst.attached_to = target.instance_id
            target.add_buff(inst.defn.buff)
            if log is not None:
                log.append(f"attached {inst.defn.id} to {target.defn.id}")
        else:  # player event
            if inst.defn.effect == "reduce_threat":
                state.threat_level = max(0, state.threat_level
                                         - inst.defn.effect_amount)
            inst.zone = Zone.PLAYER_DISCARD
            if log is not None:
                log.append(f"played {inst.defn.id}")


def _do_commit(state: GameState, action: Commit, log: list | None) -> None:
    if len(set(action.characters)) != len(action.characters):
        raise IllegalActionError("duplicate character in commit")
    insts = []
    total = 0
    for iid in action.characters:
        c = _instance(state, iid)
        if c.zone is not Zone.PLAY_AREA or c.defn.kind not in _CHARS:
            raise IllegalActionError(f"{c.defn.id}#{iid} is not a character in play")
        if c.exhausted:
            raise IllegalActionError(f"{c.defn.id}#{iid} is exhausted")
        if c.willpower <= 0:
            raise IllegalActionError(f"{c.defn.id}#{iid} has zero willpower")
        insts.append(c)
        total += c.willpower
    if insts:
        threshold = state.staging_threat()
        if total <= threshold:
            raise IllegalActionError(f"committed willpower {total} must strictly "
                                     f"exceed staging threat {threshold}")
    for c in insts:
        c.committed = True
        c.exhausted = True


def _do_travel(state: GameState, action: TravelTo, log: list | None) -> None:
    if action.location is None:
        return
    loc = _instance(state, action.location)
    if loc.defn.kind is not CardKind.LOCATION or loc.zone is not Zone.STAGING_AREA:
        raise IllegalActionError(f"{loc.defn.id}#{loc.instance_id} is not a "
                                 f"staging-area location")
    if state.active_location() is not None:
        raise IllegalActionError("a location is already active")
    loc.zone = Zone.ACTIVE_LOCATION


def _do_defend(state: GameState, action: Defend, log: list | None) -> None:
    engaged = [e.instance_id for e in state.engaged_enemies()]
    keys = [e for e, _ in action.assignments]
    if keys != engaged:
        raise IllegalActionError(f"assignments must cover engaged enemies "
                                 f"exactly: expected {engaged}, got {keys}")
    dmap: dict[int, int | None] = {}
    used: set[int] = set()
    for eid, did in action.assignments:
        if did is None:
            dmap[eid] = None
            continue
        defender = _instance(state, did)
        if defender.zone is not Zone.PLAY_AREA or defender.defn.kind not in _CHARS:
            raise IllegalActionError(f"{defender.defn.id}#{did} is not a "
                                     f"character in play")
        if defender.exhausted:
            raise IllegalActionError(f"{defender.defn.id}#{did} is exhausted")
        if did in used:
            raise IllegalActionError(f"{defender.defn.id}#{did} cannot defend twice")
        used.add(did)
        dmap[eid] = did
    for did in used:
        state.cards[did].exhausted = True
    state.defense_map = dmap


def _do_attack(state: GameState, action: Attack, log: list | None) -> None:
    engaged = {e.instance_id for e in state.engaged_enemies()}
    amap: dict[int, tuple[int, ...]] = {}
    used: set[int] = set()
    for eid, group in action.assignments:
        if eid not in engaged:
            raise IllegalActionError(f"instance {eid} is not an engaged enemy")
        if eid in amap:
            raise IllegalActionError(f"enemy {eid} attacked twice")
        if not group:
            raise IllegalActionError(f"empty attacker group for enemy {eid}")
        for aid in group:
            attacker = _instance(state, aid)
            if attacker.zone is not Zone.PLAY_AREA or attacker.defn.kind not in _CHARS:
                raise IllegalActionError(f"{attacker.defn.id}#{aid} is not a "
                                         f"character in play")
            if attacker.exhausted:
                raise IllegalActionError(f"{attacker.defn.id}#{aid} is exhausted")
            if aid in used:
                raise IllegalActionError(f"{attacker.defn.id}#{aid} cannot "
                                         f"attack twice")
            used.add(aid)
        amap[eid] = group
    for aid in used:
        state.cards[aid].exhausted = True
    state.attack_map = amap


_DO: dict[type, Callable] = {
    PlayCards: _do_play,
    Commit: _do_commit,
    TravelTo: _do_travel,
    Defend: _do_defend,
    Attack: _do_attack,
}


def _advance(state: GameState) -> None:
    if state.stage is StageId.REFRESH:
        state.round_no += 1
    state.stage = next_stage(state.stage)


def _apply_inplace(state: GameState, action: Action, log: list | None = None) -> None:
    if state.outcome is not None:
        raise StageError("game is over")
    expected = ACTION_STAGE.get(type(action))
    if expected is None:
        raise IllegalActionError(f"not an action: {action!r}")
    if state.stage is not expected:
        raise IllegalActionError(f"{type(action).__name__} applies at stage "
                                 f"'{expected.value}', game is at "
                                 f"'{state.stage.value}'")
    _DO[type(action)](state, action, log)
    if state.outcome is None:
        _advance(state)


def apply_action(state: GameState, action: Action) -> GameState:
    """Validate and apply a decision action, returning the successor state.

    Structural validation names the violated rule (wrong stage, unpayable
    buy, exhausted defender...). The input state is not modified.
    """
    successor = state.clone()
    _apply_inplace(successor, action)
    return successor


# ---- ruled stages -----------------------------------------------------------


def _stage_gain(state: GameState, log: list | None) -> None:
    for hero in state.heroes():
        hero.resource_pool += 1
    if not state.player_deck:
        state.outcome = Outcome.LOSS_DECK_EMPTY
        if log is not None:
            log.append("player deck empty")
        return
    iid = state.player_deck.pop()
    state.cards[iid].zone = Zone.HAND
    if log is not None:
        log.append(f"drew {state.cards[iid].defn.id}")


def _stage_quest_resolution(state: GameState, log: list | None) -> None:
    willpower = sum(c.willpower for c in state.committed_characters())
    threat = state.staging_threat()
    if log is not None:
        log.append(f"willpower {willpower} vs threat {threat}")
    if willpower > threat:
        _add_progress(state, willpower - threat, log)
    elif willpower < threat:
        _raise_threat(state, threat - willpower)


def _stage_engagement(state: GameState, log: list | None) -> None:
    while True:
        moved = False
        for c in state.cards:
            if (c.zone is Zone.STAGING_AREA and c.defn.kind is CardKind.ENEMY
                    and c.defn.engagement_cost <= state.threat_level):
                c.zone = Zone.ENGAGEMENT_AREA
                moved = True
                if log is not None:
                    log.append(f"{c.defn.id} engages")
        if not moved:
            return


def _stage_enemy_attacks(state: GameState, log: list | None) -> None:
    for eid in sorted(state.defense_map):
        enemy = state.cards[eid]
        if enemy.zone is not Zone.ENGAGEMENT_AREA:
            continue
        attack = enemy.attack
        if enemy.shadow_card is not None:
            attack += state.cards[enemy.shadow_card].defn.shadow_attack_bonus
        did = state.defense_map[eid]
        if did is not None and state.cards[did].zone is Zone.PLAY_AREA:
            defender = state.cards[did]
            _deal_damage(state, defender, attack - defender.defense, log)
        else:
            # Undefended attacks hit the first surviving hero at full force.
            heroes = state.heroes()
            if not heroes:
                break
            _deal_damage(state, heroes[0], attack, log)
        if state.outcome is not None:
            break
    state.defense_map = {}


def _stage_player_attacks(state: GameState, log: list | None) -> None:
    for eid in sorted(state.attack_map):
        enemy = state.cards[eid]
        if enemy.zone is not Zone.ENGAGEMENT_AREA:
            continue
        total = sum(state.cards[aid].attack for aid in state.attack_map[eid]
                    if state.cards[aid].zone is Zone.PLAY_AREA)
        _deal_damage(state, enemy, total - enemy.defense, log)
    state.attack_map = {}


def _stage_refresh(state: GameState, log: list | None) -> None:
    for c in state.cards:
        if c.shadow_card is not None:
            shadow = state.cards[c.shadow_card]
            shadow.reset_in_game_state()
            shadow.zone = Zone.ENCOUNTER_DISCARD
            c.shadow_card = None
        if c.exhausted:
            c.exhausted = False
        if c.committed:
            c.committed = False
    _raise_threat(state, 1)
    if log is not None:
        log.append(f"ready all, threat +1")


_RULED: dict[StageId, Callable[[GameState, list | None], None]] = {
    StageId.GAIN_RESOURCES_AND_DRAW: _stage_gain,
    StageId.QUEST_RESOLUTION: _stage_quest_resolution,
    StageId.ENGAGEMENT_CHECKS: _stage_engagement,
    StageId.RESOLVE_ENEMY_ATTACKS: _stage_enemy_attacks,
    StageId.RESOLVE_PLAYER_ATTACKS: _stage_player_attacks,
    StageId.REFRESH: _stage_refresh,
}


def _ruled_inplace(state: GameState, log: list | None = None) -> None:
    if state.outcome is not None:
        raise StageError("game is over")
    handler = _RULED.get(state.stage)
    if handler is None:
        raise StageError(f"'{state.stage.value}' is not a ruled stage")
    handler(state, log)
    if state.outcome is None:
        _advance(state)


def advance_ruled_stage(state: GameState) -> GameState:
    """Execute the current ruled stage, returning the successor state."""
    successor = state.clone()
    _ruled_inplace(successor)
    return successor


# ---- random stages ----------------------------------------------------------


def _stage_staging(state: GameState, rng: Random, log: list | None) -> None:
    iid = _draw_encounter(state, rng)
    if iid is None:
        if log is not None:
            log.append("encounter deck empty")
        return
    card = state.cards[iid]
    if log is not None:
        log.append(f"revealed {card.defn.id}")
    if card.defn.kind is CardKind.EVENT_ENCOUNTER:
        if card.defn.effect == "raise_threat":
            _raise_threat(state, card.defn.effect_amount)
        else:  # damage_committed
            for ch in state.committed_characters():
                _deal_damage(state, ch, card.defn.effect_amount, log)
                if state.outcome is not None:
                    break
        card.zone = Zone.ENCOUNTER_DISCARD
    else:
        card.zone = Zone.STAGING_AREA


def _stage_shadows(state: GameState, rng: Random, log: list | None) -> None:
    for enemy in state.engaged_enemies():
        iid = _draw_encounter(state, rng)
        if iid is None:
            return
        shadow = state.cards[iid]
        shadow.zone = Zone.ENGAGEMENT_AREA
        shadow.attached_to = enemy.instance_id
        enemy.shadow_card = iid
        if log is not None:
            log.append(f"shadow on {enemy.defn.id}")


_RANDOM: dict[StageId, Callable[[GameState, Random, list | None], None]] = {
    StageId.STAGING: _stage_staging,
    StageId.DEAL_SHADOW_CARDS: _stage_shadows,
}


def _random_inplace(state: GameState, rng: Random, log: list | None = None) -> None:
    if state.outcome is not None:
        raise StageError("game is over")
    handler = _RANDOM.get(state.stage)
    if handler is None:
        raise StageError(f"'{state.stage.value}' is not a random stage")
    handler(state, rng, log)
    if state.outcome is None:
        _advance(state)


def resolve_random_stage(state: GameState, rng: Random) -> GameState:
    """Execute the current random stage, returning the successor state.

    Consumes the caller's rng (the input state itself is untouched).
    """
    successor = state.clone()
    _random_inplace(successor, rng)
    return successor


# ---- terminal and snapshots -------------------------------------------------


def is_terminal(state: GameState) -> Outcome | None:
    return state.outcome


def snapshot(state: GameState) -> GameState:
    """Deep copy safe to mutate independently of the original."""
    return state.clone()


# ---- driver -----------------------------------------------------------------


def _trace_line(state: GameState, round_no: int, stage: StageId,
                log: list[str]) -> str:
    events = "; ".join(log) if log else "-"
    line = (f"R{round_no:02d} {stage.value:<18} {events} | "
            f"threat={state.threat_level} "
            f"quest={min(state.quest_index + 1, 3)} "
            f"progress={state.quest_progress}")
    if state.outcome is not None:
        line += f" outcome={state.outcome.value}"
    return line


def play_game(state: GameState, policies: dict, rng: Random, *,
              trace: Callable[[str], None] | None = None,
              timings: dict | None = None,
              check: bool = False) -> GameState:
    """Drive a game to its outcome, mutating state in place.

    policies maps each decision StageId to an object with
    decide(state, legals, rng); a policy whose needs_legals attribute is
    False is handed legals=None and must construct a legal action itself.
    timings, when given, accumulates [seconds, calls] per decision stage
    (covering only the decide call). trace receives one line per stage.
    check runs the full invariant audit after every stage.
    """
    while state.outcome is None:
        stage = state.stage
        round_no = state.round_no
        log: list[str] | None = [] if trace is not None else None
        kind = stage.kind
        if kind is StageKind.RULED:
            _ruled_inplace(state, log)
        elif kind is StageKind.RANDOM:
            _random_inplace(state, rng, log)
        else:
            policy = policies[stage]
            legals = legal_actions(state) if getattr(policy, "needs_legals", True) \
                else None
            if timings is not None:
                start = time.perf_counter()
                action = policy.decide(state, legals, rng)
                elapsed = time.perf_counter() - start
                cell = timings.setdefault(stage, [0.0, 0])
                cell[0] += elapsed
                cell[1] += 1
            else:
                action = policy.decide(state, legals, rng)
            if log is not None:
                log.append(describe_action(action, state))
            _apply_inplace(state, action, log)
        if trace is not None:
            trace(_trace_line(state, round_no, stage, log))
        if check:
            check_invariants(state)
    return state


# ---- invariant audit --------------------------------------------------------


def check_invariants(state: GameState) -> None:
    """Audit structural invariants; raises QuestSimError naming the breakage.

    Used by fuzz tests and the driver's check mode, not on hot paths.
    """
    def fail(msg: str) -> None:
        raise QuestSimError(f"invariant violation: {msg}")

    for i, c in enumerate(state.cards):
        if c.instance_id != i:
            fail(f"card at index {i} has instance_id {c.instance_id}")

    for deck, zone, name in ((state.player_deck, Zone.PLAYER_DECK, "player"),
                             (state.encounter_deck, Zone.ENCOUNTER_DECK,
                              "encounter")):
        if len(set(deck)) != len(deck):
            fail(f"duplicate ids in {name} deck")
        for iid in deck:
            if state.cards[iid].zone is not zone:
                fail(f"{name} deck lists {iid} but its zone is "
                     f"{state.cards[iid].zone.value}")
        in_zone = sum(1 for c in state.cards if c.zone is zone)
        if in_zone != len(deck):
            fail(f"{in_zone} cards in zone {zone.value} but {name} deck "
                 f"lists {len(deck)}")

    shadows = [c.shadow_card for c in state.cards if c.shadow_card is not None]
    if len(set(shadows)) != len(shadows):
        fail("one card dealt as shadow to two enemies")
    for c in state.cards:
        if c.shadow_card is not None:
            if c.defn.kind is not CardKind.ENEMY or c.zone is not Zone.ENGAGEMENT_AREA:
                fail(f"{c!r} holds a shadow card but is not an engaged enemy")
            shadow = state.cards[c.shadow_card]
            if shadow.zone is not Zone.ENGAGEMENT_AREA:
                fail(f"shadow card {c.shadow_card} left the engagement area")
            if shadow.attached_to != c.instance_id:
                fail(f"shadow card {c.shadow_card} not marked as attached "
                     f"to its enemy {c.instance_id}")
        if (c.zone is Zone.ENGAGEMENT_AREA and c.attached_to is not None
                and state.cards[c.attached_to].shadow_card != c.instance_id):
            fail(f"{c!r} marked as a shadow of {c.attached_to} which does "
                 f"not hold it")
        if c.committed and (c.zone is not Zone.PLAY_AREA or not c.exhausted
                            or c.defn.kind not in _CHARS):
            fail(f"{c!r} committed but not an exhausted character in play")
        if c.damage and c.zone in (Zone.PLAYER_DECK, Zone.ENCOUNTER_DECK,
                                   Zone.PLAYER_DISCARD, Zone.ENCOUNTER_DISCARD):
            fail(f"{c!r} carries damage outside play")
        if c.zone in (Zone.PLAY_AREA, Zone.ENGAGEMENT_AREA, Zone.STAGING_AREA) \
                and c.defn.hit_points and c.damage >= c.hit_points:
            fail(f"{c!r} should have been destroyed")
        if c.resource_pool and c.defn.kind is not CardKind.HERO:
            fail(f"{c!r} holds resources but is not a hero")
        if c.progress and c.zone is not Zone.ACTIVE_LOCATION:
            fail(f"{c!r} carries quest progress but is not the active location")
        if c.attached_to is not None:
            bearer = state.cards[c.attached_to]
            if c.zone is Zone.PLAY_AREA and bearer.zone is not Zone.PLAY_AREA:
                fail(f"{c!r} attached to {bearer!r} which left play")

    active = [c for c in state.cards if c.zone is Zone.ACTIVE_LOCATION]
    if len(active) > 1:
        fail("more than one active location")

    if state.outcome is Outcome.WIN:
        if state.quest_index != 3:
            fail(f"won with quest_index {state.quest_index}")
    elif not 0 <= state.quest_index <= 2:
        fail(f"quest_index {state.quest_index} out of range")
    else:
        done = {state.quest_ids[i] for i in range(state.quest_index)}
        for iid in state.quest_ids:
            zone = state.cards[iid].zone
            want = Zone.COMPLETED_QUESTS if iid in done else Zone.STAGING_AREA
            if zone is not want:
                fail(f"quest card {iid} in {zone.value}, expected {want.value}")
        if state.quest_progress >= state.current_quest().defn.quest_points:
            fail(f"quest_progress {state.quest_progress} not rolled over")

    if state.quest_progress < 0:
        fail("negative quest_progress")
    if not 0 <= state.threat_level <= state.scenario.threat_limit:
        fail(f"threat {state.threat_level} outside [0, limit]")
    if state.outcome is None and state.threat_level >= state.scenario.threat_limit:
        fail("threat at limit but game not lost")
