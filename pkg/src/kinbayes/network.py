"""Reaction networks: species, mass-action hazards, and the model file format.

Model document grammar (line oriented, ``#`` starts a comment)::

    document  := line*
    line      := species | reaction | conserve | init | blank
    species   := "species:" NAME+
    reaction  := "reaction" [LABEL] ":" side "->" side
    side      := "0" | term ("+" term)* | <empty>
    term      := [INT] NAME                 e.g. "2A", "2 A", "E"
    conserve  := "conserve:" term ("+" term)* "=" INT
    init      := "init:" (NAME "=" INT)+

``NAME`` and ``LABEL`` match ``[A-Za-z_][A-Za-z0-9_]*``. Exactly one
``species`` line must precede every other statement. Reactions without a
label are named ``R1``, ``R2``, ... in declaration order. The optional
``init`` line gives a default initial state and must assign every species.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, ConservationError, CountOverflowError, ModelSyntaxError

MAX_COUNT = 2**62
_NAME = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
_TERM = re.compile(r"\s*(\d*)\s*([A-Za-z_][A-Za-z0-9_]*)\s*\Z")


@dataclass(frozen=True)
class Reaction:
    reactants: tuple[int, ...]
    state_change: tuple[int, ...]
    label: str

    @property
    def products(self) -> tuple[int, ...]:
        return tuple(k + v for k, v in zip(self.reactants, self.state_change))


@dataclass(frozen=True)
class ConservationLaw:
    coefficients: tuple[int, ...]
    constant: int

    def value(self, x) -> int:
        return int(np.dot(self.coefficients, np.asarray(x, dtype=np.int64)))


@dataclass(frozen=True, eq=False)
class ReactionNetwork:
    species: tuple[str, ...]
    reactions: tuple[Reaction, ...]
    conservation_laws: tuple[ConservationLaw, ...] = ()
    initial_state: tuple[int, ...] | None = None
    reactant_matrix: np.ndarray = field(init=False, repr=False)
    stoichiometry: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        n = len(self.species)
        if n == 0:
            raise ContractError("network needs at least one species")
        if len(set(self.species)) != n:
            raise ContractError(f"duplicate species names in {self.species}")
        if not self.reactions:
            raise ContractError("no reactions")
        labels = [r.label for r in self.reactions]
        if len(set(labels)) != len(labels):
            raise ContractError(f"duplicate reaction labels in {labels}")
        for r in self.reactions:
            if len(r.reactants) != n or len(r.state_change) != n:
                raise ContractError(f"reaction {r.label} has wrong vector length")
            if any(k < 0 for k in r.reactants) or any(p < 0 for p in r.products):
                raise ContractError(f"reaction {r.label} has negative multiplicities")
        K = np.array([r.reactants for r in self.reactions], dtype=np.int64)
        V = np.array([r.state_change for r in self.reactions], dtype=np.int64)
        K.setflags(write=False)
        V.setflags(write=False)
        object.__setattr__(self, "reactant_matrix", K)
        object.__setattr__(self, "stoichiometry", V)
        for law in self.conservation_laws:
            if len(law.coefficients) != n:
                raise ContractError("conservation law has wrong vector length")
            for r, v in zip(self.reactions, V):
                if int(np.dot(law.coefficients, v)) != 0:
                    raise ConservationError(
                        f"reaction {r.label} violates conservation law "
                        f"{law_to_text(self, law)}"
                    )
        if self.initial_state is not None:
            x0 = self.check_state(self.initial_state)
            object.__setattr__(self, "initial_state", tuple(int(c) for c in x0))
            self.check_conservation(x0, "initial state")

    @property
    def n_species(self) -> int:
        return len(self.species)

    @property
    def n_reactions(self) -> int:
        return len(self.reactions)

    @property
    def labels(self) -> list[str]:
        return [r.label for r in self.reactions]

    def species_index(self, name: str) -> int:
        try:
            return self.species.index(name)
        except ValueError:
            raise ContractError(f"unknown species {name!r}") from None

    def check_state(self, x) -> np.ndarray:
        arr = np.asarray(x, dtype=np.int64)
        if arr.shape != (self.n_species,):
            raise ContractError(f"state must have length {self.n_species}, got shape {arr.shape}")
        if np.any(arr < 0):
            raise ContractError(f"state has negative counts: {arr.tolist()}")
        return arr

    def law_values(self, x) -> tuple[int, ...]:
        return tuple(law.value(x) for law in self.conservation_laws)

    def check_conservation(self, x, what="state"):
        for law in self.conservation_laws:
            if law.value(x) != law.constant:
                raise ConservationError(
                    f"{what} {list(map(int, x))} violates {law_to_text(self, law)}"
                )


def falling_factorial(n: int, k: int) -> int:
    out = 1
    for i in range(k):
        out *= n - i
    return out if n >= k else 0


def hazards(network: ReactionNetwork, x) -> np.ndarray:
    """Mass-action hazards: product of falling factorials x_i^(k_ij)."""
    x = network.check_state(x)
    h = np.ones(network.n_reactions, dtype=np.float64)
    for j, kj in enumerate(network.reactant_matrix):
        for i in np.flatnonzero(kj):
            h[j] *= falling_factorial(int(x[i]), int(kj[i]))
    return h


def propensities(h, theta) -> tuple[np.ndarray, float]:
    h = np.asarray(h, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    if h.shape != theta.shape:
        raise ContractError(f"hazard/theta length mismatch: {h.shape} vs {theta.shape}")
    a = theta * h
    return a, float(a.sum())


def apply_reaction(x, j: int, network: ReactionNetwork) -> np.ndarray:
    x = network.check_state(x)
    if not 0 <= j < network.n_reactions:
        raise ContractError(f"reaction index {j} out of range")
    if hazards(network, x)[j] <= 0:
        raise ContractError(
            f"reaction {network.reactions[j].label} cannot fire in state {x.tolist()}"
        )
    y = x + network.stoichiometry[j]
    if np.any(y >= MAX_COUNT):
        raise CountOverflowError(f"species count overflow firing {network.reactions[j].label}")
    return y


def check_theta(theta, m: int) -> np.ndarray:
    arr = np.asarray(theta, dtype=np.float64)
    if arr.shape != (m,):
        raise ContractError(f"theta must have length {m}, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)) or np.any(arr <= 0):
        raise ContractError(f"theta entries must be positive and finite: {arr.tolist()}")
    return arr


def law_to_text(network: ReactionNetwork, law: ConservationLaw) -> str:
    terms = [
        (f"{c}{s}" if c != 1 else s)
        for c, s in zip(law.coefficients, network.species)
        if c != 0
    ]
    return " + ".join(terms) + f" = {law.constant}"


# -- parsing ------------------------------------------------------------------


def _parse_terms(text, species, lineno, col0, allow_empty):
    counts = [0] * len(species)
    stripped = text.strip()
    if stripped in ("", "0", "∅"):
        if not allow_empty and stripped == "":
            raise ModelSyntaxError("empty expression", lineno, col0 + 1)
        return counts
    offset = 0
    for part in text.split("+"):
        m = _TERM.match(part)
        col = col0 + offset + (len(part) - len(part.lstrip())) + 1
        if not m:
            raise ModelSyntaxError(f"bad term {part.strip()!r}", lineno, col)
        coef = int(m.group(1)) if m.group(1) else 1
        name = m.group(2)
        if name not in species:
            raise ModelSyntaxError(f"unknown species {name!r}", lineno, col)
        counts[species.index(name)] += coef
        offset += len(part) + 1
    return counts


def parse_network(text: str) -> ReactionNetwork:
    """Parse a model document (grammar in the module docstring)."""
    species: list[str] | None = None
    reactions: list[Reaction] = []
    laws: list[ConservationLaw] = []
    init = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        head, sep, body = line.partition(":")
        if not sep:
            raise ModelSyntaxError("expected 'keyword:'", lineno, 1)
        col0 = len(head) + 1
        words = head.split()
        keyword = words[0] if words else ""
        if keyword != "species" and species is None:
            raise ModelSyntaxError("'species:' must come first", lineno, 1)
        if keyword == "species":
            if species is not None:
                raise ModelSyntaxError("duplicate 'species:' line", lineno, 1)
            if len(words) != 1:
                raise ModelSyntaxError("unexpected text before ':'", lineno, 1)
            names = body.split()
            for name in names:
                if not _NAME.match(name):
                    raise ModelSyntaxError(f"bad species name {name!r}", lineno, line.find(name) + 1)
            if not names:
                raise ModelSyntaxError("no species declared", lineno, col0 + 1)
            if len(set(names)) != len(names):
                raise ModelSyntaxError("duplicate species names", lineno, col0 + 1)
            species = names
        elif keyword == "reaction":
            if len(words) > 2:
                raise ModelSyntaxError("bad reaction label", lineno, 1)
            label = words[1] if len(words) == 2 else f"R{len(reactions) + 1}"
            if not _NAME.match(label):
                raise ModelSyntaxError(f"bad reaction label {label!r}", lineno, 1)
            if label in {r.label for r in reactions}:
                raise ModelSyntaxError(f"duplicate reaction label {label!r}", lineno, 1)
            lhs, arrow, rhs = body.partition("->")
            if not arrow:
                raise ModelSyntaxError("reaction needs '->'", lineno, col0 + 1)
            k = _parse_terms(lhs, species, lineno, col0, True)
            p = _parse_terms(rhs, species, lineno, col0 + len(lhs) + 2, True)
            reactions.append(Reaction(tuple(k), tuple(pi - ki for pi, ki in zip(p, k)), label))
        elif keyword == "conserve":
            lhs, eq, rhs = body.partition("=")
            if not eq:
                raise ModelSyntaxError("conservation law needs '='", lineno, col0 + 1)
            coef = _parse_terms(lhs, species, lineno, col0, False)
            try:
                const = int(rhs.strip())
            except ValueError:
                raise ModelSyntaxError(
                    f"bad constant {rhs.strip()!r}", lineno, col0 + len(lhs) + 2
                ) from None
            laws.append(ConservationLaw(tuple(coef), const))
        elif keyword == "init":
            if init is not None:
                raise ModelSyntaxError("duplicate 'init:' line", lineno, 1)
            values = {}
            for tok in body.split():
                name, eq, val = tok.partition("=")
                col = line.find(tok) + 1
                if not eq or name not in species or not val.isdigit():
                    raise ModelSyntaxError(f"bad assignment {tok!r}", lineno, col)
                values[name] = int(val)
            missing = [s for s in species if s not in values]
            if missing:
                raise ModelSyntaxError(f"init misses species {missing}", lineno, col0 + 1)
            init = tuple(values[s] for s in species)
        else:
            raise ModelSyntaxError(f"unknown keyword {keyword!r}", lineno, 1)
    if species is None:
        raise ModelSyntaxError("no 'species:' line")
    if not reactions:
        raise ModelSyntaxError("no reactions")
    try:
        return ReactionNetwork(tuple(species), tuple(reactions), tuple(laws), init)
    except ContractError as exc:
        raise ModelSyntaxError(str(exc)) from exc


def load_network(path) -> ReactionNetwork:
    with open(path, encoding="utf-8") as fh:
        return parse_network(fh.read())


MICHAELIS_MENTEN = """\
# Michaelis-Menten enzyme kinetics
species: E S ES P
reaction bind: E + S -> ES
reaction unbind: ES -> E + S
reaction convert: ES -> E + P
conserve: E + ES = 120
conserve: S + ES + P = 301
init: E=120 S=301 ES=0 P=0
"""


def michaelis_menten() -> ReactionNetwork:
    return parse_network(MICHAELIS_MENTEN)
