"""Train the step-selection policy on the scripted suite.

Every episode replays one task with sampled keep/skip choices and applies a
clipped REINFORCE update.  At the default learning rate the weights move
very little; a larger rate shows the direction of travel.
"""

from dcot import DCoTConfig
from dcot.harness import train
from dcot.tasks import load_suite, scripted_suite_path

tasks = load_suite(scripted_suite_path())

for eta in (0.0, 0.01, 0.5):
    result = train(tasks, 300, DCoTConfig(eta_lr=eta))
    first, last = result.window_means(50)
    p = result.params
    print(f"eta_lr={eta:<5} first50={first:.4f} last50={last:.4f}  w_adv={p.w_adv:.4f} w_gate={p.w_gate:.4f}")

print()
print(result.log[0])
print(result.log[-1])
