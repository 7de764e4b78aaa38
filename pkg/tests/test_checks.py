from shelab.checks import lemma_suite


def test_reduced_lattice_passes():
    results = lemma_suite(ns=(3, 4, 8), thetas=(0.0, 0.5, 1.0))
    failed = [r.name for r in results if not r.passed]
    assert not failed, failed


def test_fault_injection_names_failing_check():
    results = lemma_suite(ns=(8,), thetas=(1.0,), eigenvalue_perturbation=1e-3)
    failed = {r.name for r in results if not r.passed}
    assert "eigenpair-consistency" in failed
