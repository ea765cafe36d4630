/** Browser bootstrap: wires the rendered DOM to the service client.
 *
 * Optimistic updates are deliberately off: every state transition waits for
 * the service acknowledgment, then re-renders from the response.
 */

import { ApiClient } from "./api";
import { renderApp } from "./render";
import {
  applyClassify,
  applyCore,
  applyError,
  applyMaxweak,
  applyMutation,
  applySolve,
  initialView,
  toggleRow,
  type ViewState,
} from "./state";
import type { ClassifyResult, CoreResult, MaxWeakResult, SolveResult } from "./types";

const SERVICE = (window as any).ATDECOR_SERVICE ?? "http://127.0.0.1:8740";

export async function boot(container: HTMLElement, example = "atm"): Promise<void> {
  const api = new ApiClient(SERVICE);
  if (!(await api.healthy())) {
    container.innerHTML = `<div class="banner banner-bad">service unreachable at ${SERVICE}</div>`;
    return;
  }
  let state: ViewState;
  try {
    state = initialView(await api.createSession({ example }));
  } catch (err) {
    container.innerHTML = `<div class="banner banner-bad">${String(err)}</div>`;
    return;
  }

  const redraw = () => {
    container.innerHTML = renderApp(state);
  };

  const update = (next: ViewState) => {
    state = next;
    redraw();
  };

  async function act(fn: () => Promise<ViewState>) {
    try {
      update(await fn());
    } catch (err) {
      update(applyError(state, String(err)));
    }
  }

  container.addEventListener("click", (ev) => {
    const target = ev.target as HTMLElement;
    const action = target.getAttribute("data-action");
    if (!action) return;
    const sid = state.sessionId;
    if (action === "run-solve") {
      act(async () => applySolve(state, await api.run<SolveResult>(sid, "solve")));
    } else if (action === "run-classify") {
      act(async () => applyClassify(state, await api.run<ClassifyResult>(sid, "classify")));
    } else if (action === "run-core") {
      act(async () => applyCore(state, await api.run<CoreResult>(sid, "core")));
    } else if (action === "run-inclusion") {
      act(async () => {
        await api.run(sid, "relax-inclusion");
        return applySolve(state, await api.run<SolveResult>(sid, "solve"));
      });
    } else if (action === "run-maxweak") {
      act(async () => applyMaxweak(state, await api.run<MaxWeakResult>(sid, "relax-maxweak")));
    } else if (action === "pin") {
      const label = (container.querySelector("#pin-label") as HTMLInputElement).value;
      const value = Number((container.querySelector("#pin-value") as HTMLInputElement).value);
      act(async () => {
        const { revision } = await api.mutate(sid, { op: "pin", label, value });
        const next = applyMutation(state, revision);
        return applySolve(next, await api.run<SolveResult>(sid, "solve"));
      });
    }
  });

  container.addEventListener("change", (ev) => {
    const target = ev.target as HTMLInputElement;
    if (target.getAttribute("data-action") !== "toggle") return;
    const id = target.getAttribute("data-id")!;
    const enabled = target.checked;
    act(async () => {
      const { revision } = await api.mutate(state.sessionId, {
        op: enabled ? "enable" : "disable",
        predicate_id: id,
      });
      let next = applyMutation(toggleRow(state, id, enabled), revision);
      return applySolve(next, await api.run<SolveResult>(state.sessionId, "solve"));
    });
  });

  redraw();
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  void boot(document.getElementById("app")!);
}
