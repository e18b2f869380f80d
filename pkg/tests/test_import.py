def test_import() -> None:
    import chainsem

    assert chainsem.__version__ is not None
    assert chainsem.Scenario is chainsem.scenario.Scenario
    assert callable(chainsem.run)
