"""Replay one worked solution with and without pruning.

The scripted trace has eight steps; three of them restate or re-check
earlier work.  Long CoT keeps everything, D-CoT drops the three weak steps.
"""

from dcot import DCoTConfig
from dcot.decoder import ScriptedBackend, run_session
from dcot.tasks import load_suite, scripted_suite_path
from dcot.types import Mode

config = DCoTConfig()
task = load_suite(scripted_suite_path())[0]
trace = task.trace()
print(task.query)
print()

for i, seg in enumerate(trace.segments):
    flag = "redundant" if seg.redundant else ("answer" if seg.is_answer else "")
    print(f"  {i}  imp={seg.true_importance:.2f}  {seg.text[:60]:<60} {flag}")
print()

for mode in (Mode.BASELINE, Mode.DCOT):
    out = run_session(task.id, task.query, trace.answer, mode, ScriptedBackend(trace), config)
    print(f"{mode.value:>18}: steps={out.step_count} tokens={out.token_count} answer={out.final_answer!r}")

# per-step decisions of the pruned run
out = run_session(task.id, task.query, trace.answer, Mode.DCOT, ScriptedBackend(trace), config)
print()
print("step  importance  tau_dyn  verdict     kept")
for d in out.decisions:
    print(f"{d.segment_id:>4}  {d.importance:10.3f}  {d.tau_dyn:7.3f}  {d.verdict.value:<10}  {d.retained}")
print()
print(out.assembled.render() if out.assembled else "(nothing assembled)")
