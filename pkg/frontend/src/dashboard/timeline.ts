/** Sphere-timeline rendering: one SVG circle per reading on a horizontal
 * time axis.
 *
 * Fidelity contract: circle count, order, fill colors, and center x
 * offsets come straight from the timeline document; the only rendering
 * liberty is a 6 px minimum diameter so tiny readings stay clickable
 * (tooltips always show the exact duration).
 */

import type { SphereDoc, SphereTimelineDoc } from "../shared/wire";

export const MIN_RENDER_DIAMETER_PX = 6;

export const COLOR_MEANINGS: Record<string, string> = {
  green: "read to end of the message",
  orange: "displayed without touching the scrollbar",
  blue: "partial reading (never reached the bottom)",
};

const SVG_NS = "http://www.w3.org/2000/svg";
const MARGIN_X = 40;
const TRACK_HEIGHT = 160;

export interface TimelineHandlers {
  onSelect?: (sphere: SphereDoc, index: number) => void;
}

export function renderedDiameter(dataDiameter: number): number {
  return Math.max(dataDiameter, MIN_RENDER_DIAMETER_PX);
}

export function tooltipText(sphere: SphereDoc): string {
  const reading = sphere.reading;
  const seconds = (reading.duration_ms / 1000).toFixed(1);
  const meaning = COLOR_MEANINGS[reading.completeness] ?? reading.completeness;
  const censored = reading.censored ? " (end unobserved)" : "";
  return `${reading.actor_id} read message ${reading.message_id} for ${seconds}s${censored}: ${meaning}`;
}

/**
 * Render a timeline document into `container`, replacing any previous
 * timeline (which also dismisses its tooltip and detail selection).
 */
export function renderTimeline(
  container: HTMLElement,
  doc: SphereTimelineDoc,
  handlers: TimelineHandlers = {},
): void {
  container.replaceChildren();

  if (doc.spheres.length === 0) {
    const empty = container.ownerDocument.createElement("p");
    empty.className = "timeline-empty";
    empty.textContent = "no readings in this window";
    container.appendChild(empty);
    return;
  }

  const width =
    MARGIN_X * 2 +
    Math.max(...doc.spheres.map((s) => s.offset + renderedDiameter(s.diameter)));
  const svg = container.ownerDocument.createElementNS(SVG_NS, "svg");
  svg.setAttribute("class", "timeline");
  svg.setAttribute("width", String(Math.ceil(width)));
  svg.setAttribute("height", String(TRACK_HEIGHT));
  svg.setAttribute("role", "list");

  const axis = container.ownerDocument.createElementNS(SVG_NS, "line");
  axis.setAttribute("x1", String(MARGIN_X));
  axis.setAttribute("x2", String(Math.ceil(width - MARGIN_X)));
  axis.setAttribute("y1", String(TRACK_HEIGHT / 2));
  axis.setAttribute("y2", String(TRACK_HEIGHT / 2));
  axis.setAttribute("stroke", "#999");
  svg.appendChild(axis);

  const tooltip = container.ownerDocument.createElement("div");
  tooltip.className = "timeline-tooltip";
  tooltip.style.display = "none";

  doc.spheres.forEach((sphere, index) => {
    const circle = container.ownerDocument.createElementNS(SVG_NS, "circle");
    circle.setAttribute("role", "listitem");
    circle.setAttribute("cx", String(MARGIN_X + sphere.offset));
    circle.setAttribute("cy", String(TRACK_HEIGHT / 2));
    circle.setAttribute("r", String(renderedDiameter(sphere.diameter) / 2));
    circle.setAttribute("fill", sphere.reading.completeness);
    circle.setAttribute("data-index", String(index));
    circle.setAttribute("data-actor", sphere.reading.actor_id);
    circle.setAttribute("data-color", sphere.reading.completeness);
    circle.setAttribute("data-offset", String(sphere.offset));
    circle.setAttribute("data-diameter", String(sphere.diameter));
    circle.setAttribute("data-duration-ms", String(sphere.reading.duration_ms));
    circle.addEventListener("mouseover", () => {
      tooltip.textContent = tooltipText(sphere);
      tooltip.style.display = "block";
    });
    circle.addEventListener("mouseout", () => {
      tooltip.style.display = "none";
    });
    circle.addEventListener("click", () => {
      handlers.onSelect?.(sphere, index);
    });
    svg.appendChild(circle);
  });

  container.appendChild(svg);
  container.appendChild(tooltip);
}
