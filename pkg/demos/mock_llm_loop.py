"""Drive a full bedroom generation from recorded model replies (no network).

    python demos/mock_llm_loop.py tests/fixtures/mock_bedroom
"""

import argparse
import logging

from roomweave import Gateway, GatewayConfig, LlmScorer, default_registry, physical_metrics, run_loop
from roomweave.planner import LlmPlanBackend


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("fixtures", help="directory of <template>/<index>.txt replies")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)

    gw = Gateway(GatewayConfig(transport=f"mock:{args.fixtures}"))
    res = run_loop("Design me a bedroom", default_registry(), backend=LlmPlanBackend(gw),
                   scorer=LlmScorer(gw), gateway=gw)
    for r in res.steps:
        flag = " (rolled back)" if r.rolled_back else ""
        print(f"step {r.step}: {r.decision.chosen} -> {r.reflection.perceptual.as_tuple()}{flag}")
    print("stop:", res.stop_reason)
    print("final:", physical_metrics(res.final).to_dict())


if __name__ == "__main__":
    main()
