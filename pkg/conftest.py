def pytest_configure(config):
    config.addinivalue_line("markers", "slow: desk-scale experiment reproductions (deselect with -m 'not slow')")
