import pytest


def pytest_configure(config):
    config.scoreboard = {}


@pytest.fixture
def scoreboard(request):
    return request.config.scoreboard


def pytest_terminal_summary(terminalreporter, config):
    board = getattr(config, "scoreboard", {})
    if board:
        terminalreporter.section("acceptance criteria")
        for k in sorted(board):
            terminalreporter.write_line(board[k])
