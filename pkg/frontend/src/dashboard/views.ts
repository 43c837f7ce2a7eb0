/** Secondary dashboard views: reading detail panel, participation and
 * lurker tables, and the instructor vocabulary admin screen. */

import type { ApiClient, ModelDoc } from "./api";
import { ApiError } from "./api";
import type { ParticipationDoc, SphereDoc, StateDoc } from "../shared/wire";
import { isStateDoc } from "../shared/wire";
import { COLOR_MEANINGS } from "./timeline";

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

/** Find the reading's state in the actor's trace to list its events. */
export function findReadingState(
  sequence: Array<StateDoc | { from_activity: string }>,
  startedAtMs: number,
): StateDoc | null {
  for (const element of sequence) {
    if (
      isStateDoc(element as StateDoc) &&
      (element as StateDoc).activity === "DisplayMessage" &&
      (element as StateDoc).started_at_ms === startedAtMs
    ) {
      return element as StateDoc;
    }
  }
  return null;
}

/** Detail panel for a clicked sphere: the full reading record plus the
 * state's event list, fetched on demand through the traces endpoint. */
export async function renderSphereDetail(
  container: HTMLElement,
  api: ApiClient,
  sphere: SphereDoc,
  window: { from_ms: number; to_ms: number },
): Promise<void> {
  const doc = container.ownerDocument;
  container.replaceChildren();
  container.style.display = "block";
  const reading = sphere.reading;

  const title = el(doc, "h3", "detail-title", `Reading by ${reading.actor_id}`);
  container.appendChild(title);
  const list = el(doc, "dl", "detail-record");
  const rows: Array<[string, string]> = [
    ["message", reading.message_id],
    ["started", new Date(reading.started_at_ms).toISOString()],
    ["duration", `${(reading.duration_ms / 1000).toFixed(1)} s`],
    ["completeness", `${reading.completeness} (${COLOR_MEANINGS[reading.completeness]})`],
    ["max scroll", reading.max_scroll_ratio.toFixed(2)],
    ["end observed", reading.censored ? "no" : "yes"],
  ];
  for (const [key, value] of rows) {
    list.appendChild(el(doc, "dt", undefined, key));
    list.appendChild(el(doc, "dd", undefined, value));
  }
  container.appendChild(list);

  const eventsTitle = el(doc, "h4", undefined, "events in this state");
  container.appendChild(eventsTitle);
  const eventList = el(doc, "ul", "detail-events");
  container.appendChild(eventList);
  try {
    const traces = await api.traces({
      actor: reading.actor_id,
      activity: "DisplayMessage",
      message_id: reading.message_id,
      from_ms: window.from_ms,
      to_ms: window.to_ms,
    });
    const state = traces
      .map((trace) => findReadingState(trace.sequence, reading.started_at_ms))
      .find((found) => found !== null);
    if (!state) {
      eventList.appendChild(el(doc, "li", undefined, "state not found"));
      return;
    }
    for (const event of state.events) {
      const ratio = event.attributes["scroll_ratio"];
      const suffix = ratio !== undefined ? ` ratio=${ratio}` : "";
      eventList.appendChild(
        el(doc, "li", "detail-event", `${event.kind} on ${event.object_id}${suffix}`),
      );
    }
  } catch (error) {
    eventList.appendChild(
      el(doc, "li", "detail-error", `could not load events: ${String(error)}`),
    );
  }
}

export function renderParticipation(
  container: HTMLElement,
  summaries: ParticipationDoc[],
  lurkers: string[],
): void {
  const doc = container.ownerDocument;
  container.replaceChildren();
  const lurkerSet = new Set(lurkers);
  const table = el(doc, "table", "participation");
  const head = el(doc, "tr");
  for (const column of ["actor", "reads", "posts", "lurker"]) {
    head.appendChild(el(doc, "th", undefined, column));
  }
  table.appendChild(head);
  for (const summary of summaries) {
    const row = el(doc, "tr");
    row.setAttribute("data-actor", summary.actor_id);
    row.appendChild(el(doc, "td", undefined, summary.actor_id));
    row.appendChild(el(doc, "td", undefined, String(summary.reads)));
    row.appendChild(el(doc, "td", undefined, String(summary.posts)));
    row.appendChild(
      el(doc, "td", undefined, lurkerSet.has(summary.actor_id) ? "yes" : "no"),
    );
    table.appendChild(row);
  }
  container.appendChild(table);
  if (summaries.length === 0) {
    container.appendChild(el(doc, "p", "empty", "no activity in this window"));
  }
}

/** Vocabulary admin screen; the caller must already have verified the
 * instructor role (the server enforces it regardless). */
export function renderAdmin(
  container: HTMLElement,
  api: ApiClient,
  model: ModelDoc,
  onChanged: () => void,
): void {
  const doc = container.ownerDocument;
  container.replaceChildren();
  container.appendChild(
    el(doc, "h3", undefined, `structuring vocabulary (version ${model.version})`),
  );
  const list = el(doc, "ul", "admin-activities");
  for (const activity of model.model.activities) {
    const row = el(doc, "li");
    row.setAttribute("data-activity", activity.name);
    row.appendChild(el(doc, "span", undefined, activity.name));
    const remove = el(doc, "button", "admin-remove", "delete");
    remove.addEventListener("click", async () => {
      try {
        await api.removeActivity(activity.name);
        onChanged();
      } catch (error) {
        showToast(container, error);
      }
    });
    row.appendChild(remove);
    list.appendChild(row);
  }
  container.appendChild(list);

  const form = el(doc, "div", "admin-add");
  const nameInput = el(doc, "input") as HTMLInputElement;
  nameInput.placeholder = "new activity name";
  nameInput.className = "admin-name";
  const objectInput = el(doc, "input") as HTMLInputElement;
  objectInput.placeholder = "observable object id";
  objectInput.className = "admin-object";
  const addButton = el(doc, "button", "admin-add-button", "add activity");
  addButton.addEventListener("click", async () => {
    try {
      await api.addActivity({
        name: nameInput.value,
        observables: [
          { object_id: objectInput.value || "page", object_class: "page", events: ["display"] },
        ],
      });
      onChanged();
    } catch (error) {
      showToast(container, error);
    }
  });
  form.append(nameInput, objectInput, addButton);
  container.appendChild(form);
}

export function showToast(container: HTMLElement, error: unknown): void {
  const doc = container.ownerDocument;
  const previous = container.querySelector(".toast");
  if (previous) previous.remove();
  const message =
    error instanceof ApiError ? error.message : `unexpected error: ${String(error)}`;
  container.appendChild(el(doc, "p", "toast", message));
}
