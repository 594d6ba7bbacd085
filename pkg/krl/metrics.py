from prometheus_client import CollectorRegistry, Counter, Gauge, Histogram, write_to_textfile
import psutil

# Custom registry so repeated imports in tests never hit duplicated timeseries
registry = CollectorRegistry()

operator_applications_total = Counter(
    "krl_operator_applications_total",
    "Total operator evaluations",
    ["operator"],
    registry=registry
)

continuation_runs_total = Counter(
    "krl_continuation_runs_total",
    "Total continuation runs",
    ["operator", "status"],  # status: success/failure
    registry=registry
)

inner_iterations = Histogram(
    "krl_inner_iterations",
    "Fixed-point iterations per eps level",
    ["operator"],
    buckets=[1, 5, 10, 25, 50, 100, 250, 1000, 10000],
    registry=registry
)

property_checks_total = Counter(
    "krl_property_checks_total",
    "Total property checks",
    ["property", "status"],  # status: pass/fail
    registry=registry
)

lambda0 = Gauge("krl_lambda0", "Last principal eigenvalue computed", ["operator"], registry=registry)
memory_used = Gauge("krl_memory_used_mb", "Resident memory of the run in MB", registry=registry)


def record_application(operator: str):
    operator_applications_total.labels(operator=operator).inc()


def record_level(operator: str, iterations: int):
    inner_iterations.labels(operator=operator).observe(iterations)


def record_continuation(operator: str, status: str, value: float = None):
    continuation_runs_total.labels(operator=operator, status=status).inc()
    if value is not None:
        lambda0.labels(operator=operator).set(value)


def record_property(name: str, passed: bool):
    property_checks_total.labels(property=name, status="pass" if passed else "fail").inc()


def update_process_metrics():
    proc = psutil.Process()
    memory_used.set(round(proc.memory_info().rss / 1024 / 1024, 2))


def export_metrics(path: str):
    """Write the registry in Prometheus text format (textfile collector)."""
    update_process_metrics()
    write_to_textfile(path, registry)
