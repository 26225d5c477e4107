import pytest

from signalql.engine import Engine
from signalql.store import EventLog, ScalarType, Schema

S = ScalarType.STRING
N = ScalarType.NUMBER
B = ScalarType.BOOLEAN
T = ScalarType.TIMESTAMP
D = ScalarType.DURATION

# the two-case support-ticket log used across the docs
T1001 = (1675086864052, 1675160180724, 1675220315296)
T1002 = (1675147138009, 1675213914098, 1675282027657, 1675414104525)
CYCLE_1001 = T1001[-1] - T1001[0]  # 133451244
CYCLE_1002 = T1002[-1] - T1002[0]  # 266966516


def build_support_log(log_id: str = "support") -> EventLog:
    schema = Schema.make(
        [("case_id", S), ("customer_id", S), ("final_status", S)],
        [("event_name", S), ("end_time", T), ("status", S)],
    )
    log = EventLog(log_id, schema)
    log.append_case(
        {"case_id": "1001", "customer_id": "C2001", "final_status": "done"},
        [
            {"event_name": "Open ticket", "end_time": T1001[0], "status": "none"},
            {"event_name": "Assign ticket", "end_time": T1001[1], "status": "open"},
            {"event_name": "Close ticket", "end_time": T1001[2], "status": "done"},
        ],
    )
    log.append_case(
        {"case_id": "1002", "customer_id": "C2002", "final_status": "blocked"},
        [
            {"event_name": "Open ticket", "end_time": T1002[0], "status": "none"},
            {"event_name": "Assign ticket", "end_time": T1002[1], "status": "open"},
            {"event_name": "Close ticket", "end_time": T1002[2], "status": "blocked"},
            {"event_name": "Open ticket", "end_time": T1002[3], "status": "blocked"},
        ],
    )
    return log


@pytest.fixture
def support_log() -> EventLog:
    return build_support_log()


@pytest.fixture
def engine(support_log) -> Engine:
    eng = Engine()
    eng.add_log(support_log)
    return eng


def rows(result):
    return result.to_json_obj()["rows"]


def one_column(result):
    return [r[0] for r in rows(result)]
