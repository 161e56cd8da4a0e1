import numpy as np
import pytest

from src.combinatorics.partitions import QMatrix, Word, qgaussian_moment, wick_vector_expansion
from src.fock.fock_space import (
    FockVector,
    apply_annihilation,
    apply_creation,
    apply_field,
    basis_words,
    equal_modulo_null,
    gram_matrix,
    twisted_inner_product,
    vacuum_moment,
)
from src.util.errors import CapExceededError

LABELS = ("a", "b", "c")


def random_q(rng, labels=LABELS):
    k = len(labels)
    upper = rng.uniform(-1.0, 1.0, size=(k, k))
    entries = np.triu(upper) + np.triu(upper, 1).T
    return QMatrix(tuple(labels), entries)


def test_creation_and_annihilation():
    Q = QMatrix.from_pairs(["a", "b"], {("a", "a"): 0.5, ("a", "b"): -0.25})
    v = apply_creation("a", FockVector.basis(("b", "a")))
    assert v.terms == {("a", "b", "a"): 1.0}
    # l_a^* e_b x e_a = q(a, b) e_b
    assert apply_annihilation("a", FockVector.basis(("b", "a")), Q).terms == {("b",): -0.25}
    assert apply_annihilation("a", FockVector.vacuum(), Q).is_zero()


def test_field_on_vacuum_is_one_particle_vector():
    Q = QMatrix.constant(["a"], 0.0)
    assert apply_field("a", FockVector.vacuum(), Q).terms == {("a",): 1.0}


def test_vacuum_moments_match_partition_sums(rng):
    for _ in range(20):
        Q = random_q(rng)
        for tensor in basis_words(LABELS, 6):
            if not tensor:
                continue
            w = Word(tensor)
            assert vacuum_moment(w, Q) == pytest.approx(qgaussian_moment(w, Q), abs=1e-9)


def test_wick_expansion_matches_field_action(rng):
    for _ in range(5):
        Q = random_q(rng)
        for tensor in basis_words(LABELS, 4):
            if not tensor:
                continue
            v = FockVector.vacuum()
            for letter in reversed(tensor):
                v = apply_field(letter, v, Q)
            expansion = wick_vector_expansion(Word(tensor), Q)
            for key in set(v.terms) | set(expansion):
                assert v.coefficient(key) == pytest.approx(expansion.get(key, 0.0), abs=1e-12)


def test_gram_matrix_is_positive_semidefinite(rng):
    words = list(basis_words(("a", "b"), 3))
    for _ in range(10):
        Q = random_q(rng, ("a", "b"))
        gram = gram_matrix(words, Q)
        assert np.allclose(gram, gram.T)
        assert np.linalg.eigvalsh(gram).min() >= -1e-10


def test_inner_product_is_permanent_at_q_one():
    Q = QMatrix.constant(["a", "b"], 1.0)
    ab, ba = FockVector.basis(("a", "b")), FockVector.basis(("b", "a"))
    assert twisted_inner_product(ab, ba, Q) == 1.0
    assert twisted_inner_product(FockVector.basis(("a", "a")), FockVector.basis(("a", "a")), Q) == 2.0


def test_equal_modulo_null():
    ab, ba = FockVector.basis(("a", "b"), depth=3), FockVector.basis(("b", "a"), depth=3)
    assert equal_modulo_null(ab, ba, QMatrix.constant(["a", "b"], 1.0))
    assert not equal_modulo_null(ab, ba, QMatrix.constant(["a", "b"], 0.0))


def test_creation_past_depth_sets_truncated_flag():
    v = apply_creation("a", FockVector.basis(("a", "a"), depth=2))
    assert v.truncated
    assert v.is_zero()


def test_vacuum_moment_respects_depth_cap():
    Q = QMatrix.constant(["a"], 0.0)
    with pytest.raises(CapExceededError):
        vacuum_moment(Word(("a",) * 6), Q, depth=2)


def random_vector(rng, max_length, depth=4, count=6):
    words = list(basis_words(LABELS, max_length))
    picks = rng.choice(len(words), size=min(count, len(words)), replace=False)
    return FockVector({words[p]: float(rng.normal()) for p in picks}, depth)


def test_annihilation_is_adjoint_of_creation(rng):
    for _ in range(30):
        Q = random_q(rng)
        u, v = random_vector(rng, 3), random_vector(rng, 4)
        for i in LABELS:
            left = twisted_inner_product(apply_creation(i, u), v, Q)
            right = twisted_inner_product(u, apply_annihilation(i, v, Q), Q)
            assert left == pytest.approx(right, abs=1e-10)


def test_mixed_q_commutation_relation(rng):
    depth = 4
    for _ in range(5):
        Q = random_q(rng)
        for tensor in basis_words(LABELS, depth - 1):
            v = FockVector.basis(tensor, depth)
            for i in LABELS:
                for j in LABELS:
                    lowered_raised = apply_annihilation(i, apply_creation(j, v), Q)
                    raised_lowered = apply_creation(j, apply_annihilation(i, v, Q)).scale(Q.q(i, j))
                    expected = v if i == j else FockVector(depth=depth)
                    residue = lowered_raised - raised_lowered - expected
                    assert all(abs(c) <= 1e-12 for c in residue.terms.values()), (tensor, i, j)


def test_creations_commute_modulo_null_space_at_q_one(rng):
    for _ in range(10):
        Q = random_q(rng).with_entry("a", "b", 1.0)
        u = random_vector(rng, 2)
        ab = apply_creation("a", apply_creation("b", u))
        ba = apply_creation("b", apply_creation("a", u))
        assert equal_modulo_null(ab, ba, Q, tol=1e-9)
    Q = QMatrix.constant(LABELS, 0.3)
    vacuum = FockVector.vacuum(4)
    assert not equal_modulo_null(
        apply_creation("a", apply_creation("b", vacuum)), apply_creation("b", apply_creation("a", vacuum)), Q
    )
