"""Stratified Lie algebras given by structure constants in a layer ordered basis"""

import json
import logging
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from errors import SpecError


log = logging.getLogger(__name__)

JACOBI_TOL = 1e-12


@dataclass(frozen=True)
class StratificationSpec:
    """Layer dimensions n_1..n_s and the brackets [X_i, X_j] = c X_k

    Basis vectors are numbered from zero and ordered by layer. Only one of
    (i, j, k, c) and (j, i, k, -c) needs to be given; the other is implied.
    """

    name: str
    layer_dims: tuple[int, ...]
    brackets: tuple[tuple[int, int, int, float], ...] = ()

    def __post_init__(self):
        dims = tuple(int(n) for n in self.layer_dims)
        if not dims or any(n <= 0 for n in dims):
            raise SpecError(f'layer dimensions must be positive integers, got {self.layer_dims}')

        object.__setattr__(self, 'layer_dims', dims)
        object.__setattr__(
            self, 'brackets',
            tuple((int(i), int(j), int(k), float(c)) for i, j, k, c in self.brackets)
        )
        self._validate()

    @property
    def step(self) -> int:
        return len(self.layer_dims)

    @property
    def total_dim(self) -> int:
        return sum(self.layer_dims)

    @property
    def homogeneous_dim(self) -> int:
        """q = sum of k * dim V_k"""
        return sum((i + 1) * n for i, n in enumerate(self.layer_dims))

    @property
    def is_abelian(self) -> bool:
        return self.step == 1

    @cached_property
    def offsets(self) -> tuple[int, ...]:
        """Start index of every layer, followed by the total dimension"""

        return tuple(int(v) for v in np.concatenate(([0], np.cumsum(self.layer_dims))))

    @cached_property
    def layer_of(self) -> np.ndarray:
        """One based layer number of every coordinate"""

        layers = np.repeat(np.arange(1, self.step + 1), self.layer_dims)
        layers.setflags(write=False)
        return layers

    def layer_slice(self, i: int) -> slice:
        """Coordinates of layer i (one based)"""

        self.check_layer(i)
        return slice(self.offsets[i - 1], self.offsets[i])

    def check_layer(self, i: int):
        if not 1 <= i <= self.step:
            raise SpecError(f'layer index {i} outside 1..{self.step}')

    @cached_property
    def structure(self) -> np.ndarray:
        """Dense structure tensor C with [X_i, X_j] = sum_k C[i, j, k] X_k"""

        dim = self.total_dim
        table = np.zeros((dim, dim, dim))
        for i, j, k, c in self.brackets:
            for a, b, val in ((i, j, c), (j, i, -c)):
                if table[a, b, k] not in (0.0, val):
                    raise SpecError(f'conflicting structure constants for [X{i}, X{j}] on X{k}')
                table[a, b, k] = val

        table.setflags(write=False)
        return table

    def _validate(self):
        dim = self.total_dim
        layers = self.layer_of
        for i, j, k, c in self.brackets:
            if not all(0 <= idx < dim for idx in (i, j, k)):
                raise SpecError(f'bracket index out of range in {(i, j, k)} for dimension {dim}')

            if not np.isfinite(c):
                raise SpecError(f'structure constant for {(i, j, k)} is not finite')

            if i == j and c != 0:
                raise SpecError(f'[X{i}, X{i}] must vanish')

            if c != 0 and layers[k] != layers[i] + layers[j]:
                raise SpecError(
                    f'[X{i}, X{j}] lands in layer {layers[k]}, grading requires {layers[i] + layers[j]}'
                )

        table = self.structure
        jacobi = (
            np.einsum('jlm,imn->ijln', table, table)
            + np.einsum('lim,jmn->ijln', table, table)
            + np.einsum('ijm,lmn->ijln', table, table)
        )
        if np.abs(jacobi).max(initial=0.0) > JACOBI_TOL:
            raise SpecError(f'{self.name}: Jacobi identity fails')

        # Each layer past the first has to be spanned by brackets with the first
        for i in range(2, self.step + 1):
            block = table[self.layer_slice(1), self.layer_slice(i - 1), self.layer_slice(i)]
            rank = np.linalg.matrix_rank(block.reshape(-1, self.layer_dims[i - 1]))
            if rank < self.layer_dims[i - 1]:
                raise SpecError(f'{self.name}: layer {i} is not generated by the first layer')

    def truncate(self, i: int) -> 'StratificationSpec':
        """Stratification of the quotient G_i = G / G^(i+1)"""

        self.check_layer(i)
        if i == self.step:
            return self

        dim = self.offsets[i]
        kept = tuple(b for b in self.brackets if b[2] < dim)
        return StratificationSpec(f'{self.name}/G{i}', self.layer_dims[:i], kept)

    def to_dict(self) -> dict:
        return {
            'name': self.name,
            'step': self.step,
            'layer_dims': list(self.layer_dims),
            'brackets': [{'i': i, 'j': j, 'k': k, 'c': c} for i, j, k, c in self.brackets],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> 'StratificationSpec':
        """Parse {step, layer_dims, brackets: [{i, j, k, c}]}

        Raises:
            SpecError: missing fields or a step that disagrees with layer_dims
        """

        try:
            dims = tuple(doc['layer_dims'])
            brackets = tuple((b['i'], b['j'], b['k'], b.get('c', 1.0)) for b in doc.get('brackets', ()))
        except (KeyError, TypeError) as exc:
            raise SpecError(f'malformed group document: {exc}') from exc

        if 'step' in doc and int(doc['step']) != len(dims):
            raise SpecError(f"step {doc['step']} disagrees with {len(dims)} layers")

        return cls(doc.get('name', 'custom'), dims, brackets)


def abelian(n: int) -> StratificationSpec:
    """R^n, step one"""

    return StratificationSpec(f'abelian:{n}', (n,))


def heisenberg(m: int=1) -> StratificationSpec:
    """H^m with [X_a, Y_a] = T for a = 1..m"""

    if m < 1:
        raise SpecError('heisenberg rank must be positive')

    brackets = tuple((a, m + a, 2 * m, 1.0) for a in range(m))
    return StratificationSpec(f'h{m}', (2 * m, 1), brackets)


def engel() -> StratificationSpec:
    """Engel group: [X1, X2] = X3, [X1, X3] = X4"""

    return StratificationSpec('engel', (2, 1, 1), ((0, 1, 2, 1.0), (0, 2, 3, 1.0)))


def load_spec(path: str|Path) -> StratificationSpec:
    """Read a group document from disk"""

    with open(path, 'r', encoding='utf-8') as file:
        doc = json.load(file)

    spec = StratificationSpec.from_dict(doc)
    log.debug('Loaded group %s from %s', spec.name, path)
    return spec


def resolve_group(text: str) -> StratificationSpec:
    """Translate a CLI group name into a stratification

    Args:
        text (str): abelian:n, hN for the Heisenberg group of dimension 2N+1, engel or file:PATH

    Raises:
        SpecError: unknown group name
    """

    text = text.strip().lower() if not text.startswith('file:') else text
    if text.startswith('abelian:'):
        try:
            return abelian(int(text.split(':', 1)[1]))
        except ValueError as exc:
            raise SpecError(f'bad abelian dimension in {text!r}') from exc

    if text.startswith('file:'):
        return load_spec(text[5:])

    if text == 'engel':
        return engel()

    if text.startswith('h') and text[1:].isdigit():
        return heisenberg(int(text[1:]))

    raise SpecError(f'unknown group {text!r}')
