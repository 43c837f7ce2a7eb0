/** Dashboard unit tests: form validation, rendering fidelity, role gate. */

import { beforeEach, describe, expect, it } from "vitest";

import { DashboardApp } from "../src/dashboard/app";
import { defaultForm, formWindow } from "../src/dashboard/form";
import {
  MIN_RENDER_DIAMETER_PX,
  renderTimeline,
  renderedDiameter,
  tooltipText,
} from "../src/dashboard/timeline";
import type { SphereTimelineDoc } from "../src/shared/wire";

const TIMELINE: SphereTimelineDoc = {
  message_id: "25",
  window: { from_ms: 1_000, to_ms: 500_000 },
  scale_k: 0.5,
  scale_t: 0.25,
  spheres: [
    {
      reading: {
        actor_id: "u1",
        message_id: "25",
        started_at_ms: 1_000,
        duration_ms: 60_000,
        censored: false,
        completeness: "green",
        max_scroll_ratio: 1,
      },
      diameter: 30_000,
      offset: 0,
    },
    {
      reading: {
        actor_id: "u2",
        message_id: "25",
        started_at_ms: 90_000,
        duration_ms: 4,
        censored: false,
        completeness: "orange",
        max_scroll_ratio: 0,
      },
      diameter: 2,
      offset: 22_250,
    },
    {
      reading: {
        actor_id: "u3",
        message_id: "25",
        started_at_ms: 200_000,
        duration_ms: 30_000,
        censored: true,
        completeness: "blue",
        max_scroll_ratio: 0.4,
      },
      diameter: 15_000,
      offset: 49_750,
    },
  ],
};

describe("query form", () => {
  it("converts the canonical query to the documented epoch window", () => {
    const outcome = formWindow(defaultForm(), 0);
    expect(outcome.error).toBeNull();
    expect(outcome.window).toEqual({
      from_ms: 1_149_073_971_000,
      to_ms: 1_149_117_764_000,
    });
  });

  it("applies the server timezone offset", () => {
    const outcome = formWindow(defaultForm(), 120); // UTC+2
    expect(outcome.window!.from_ms).toBe(1_149_073_971_000 - 120 * 60_000);
  });

  it.each([
    [{ timeFrom: "23:00:00", timeTo: "11:00:00" }, "start time"],
    [{ timeFrom: "11:61:00" }, "hh:mm:ss"],
    [{ date: "31/05/2006" }, "yyyy-mm-dd"],
    [{ scaleK: 0 }, "positive"],
  ])("rejects bad input %#", (patch, fragment) => {
    const outcome = formWindow({ ...defaultForm(), ...patch });
    expect(outcome.window).toBeNull();
    expect(outcome.error).toContain(fragment);
  });
});

describe("timeline rendering", () => {
  let container: HTMLElement;

  beforeEach(() => {
    document.body.innerHTML = "<div id='view'></div>";
    container = document.getElementById("view")!;
  });

  it("renders exactly the document's circles, in order, with exact colors and offsets", () => {
    renderTimeline(container, TIMELINE);
    const circles = Array.from(container.querySelectorAll("circle"));
    expect(circles).toHaveLength(TIMELINE.spheres.length);
    circles.forEach((circle, index) => {
      const sphere = TIMELINE.spheres[index];
      expect(circle.getAttribute("data-actor")).toBe(sphere.reading.actor_id);
      expect(circle.getAttribute("fill")).toBe(sphere.reading.completeness);
      expect(Number(circle.getAttribute("data-offset"))).toBe(sphere.offset);
      expect(Number(circle.getAttribute("data-diameter"))).toBe(sphere.diameter);
      expect(Number(circle.getAttribute("cx"))).toBe(40 + sphere.offset);
    });
  });

  it("applies the 6px minimum at render time only", () => {
    renderTimeline(container, TIMELINE);
    const tiny = container.querySelector('circle[data-actor="u2"]')!;
    expect(Number(tiny.getAttribute("r"))).toBe(MIN_RENDER_DIAMETER_PX / 2);
    expect(Number(tiny.getAttribute("data-diameter"))).toBe(2); // data untouched
    expect(renderedDiameter(2)).toBe(6);
    expect(renderedDiameter(100)).toBe(100);
  });

  it("shows an empty state for zero spheres", () => {
    renderTimeline(container, { ...TIMELINE, spheres: [] });
    expect(container.querySelector("circle")).toBeNull();
    expect(container.textContent).toContain("no readings");
  });

  it("tooltip carries exact duration and the color meaning", () => {
    renderTimeline(container, TIMELINE);
    const green = container.querySelector('circle[data-actor="u1"]')!;
    green.dispatchEvent(new MouseEvent("mouseover", { bubbles: true }));
    const tooltip = container.querySelector<HTMLElement>(".timeline-tooltip")!;
    expect(tooltip.style.display).toBe("block");
    expect(tooltip.textContent).toContain("60.0s");
    expect(tooltip.textContent).toContain("read to end");
    green.dispatchEvent(new MouseEvent("mouseout", { bubbles: true }));
    expect(tooltip.style.display).toBe("none");
  });

  it("tooltip text distinguishes the three colors", () => {
    expect(tooltipText(TIMELINE.spheres[0])).toContain("read to end");
    expect(tooltipText(TIMELINE.spheres[1])).toContain("without touching");
    expect(tooltipText(TIMELINE.spheres[2])).toContain("partial reading");
  });

  it("re-rendering dismisses the previous tooltip and selection", () => {
    const selections: string[] = [];
    renderTimeline(container, TIMELINE, {
      onSelect: (sphere) => selections.push(sphere.reading.actor_id),
    });
    const circle = container.querySelector("circle")!;
    circle.dispatchEvent(new MouseEvent("mouseover", { bubbles: true }));
    circle.dispatchEvent(new MouseEvent("click", { bubbles: true }));
    expect(selections).toEqual(["u1"]);
    renderTimeline(container, { ...TIMELINE, spheres: [] });
    expect(container.querySelector(".timeline-tooltip")).toBeNull();
  });
});

function jsonResponse(body: unknown, status = 200): Response {
  return new Response(JSON.stringify(body), {
    status,
    headers: { "Content-Type": "application/json" },
  });
}

describe("dashboard app", () => {
  let container: HTMLElement;

  beforeEach(() => {
    document.body.innerHTML = "<div id='app'></div>";
    container = document.getElementById("app")!;
  });

  function appWithFetch(routes: (url: string) => Response | null) {
    const calls: string[] = [];
    const fetchFn = (async (input: RequestInfo | URL) => {
      const url = String(input);
      calls.push(url);
      const response = routes(url);
      if (response === null) return jsonResponse({ detail: "not found" }, 404);
      return response;
    }) as typeof fetch;
    const app = new DashboardApp(container, { baseUrl: "http://svc.test", fetchFn });
    return { app, calls };
  }

  it("invalid window shows inline error and sends no request", async () => {
    const { app, calls } = appWithFetch((url) => {
      if (url.includes("/auth/whoami")) {
        return jsonResponse({ role: "student", actor_id: "u1" });
      }
      return null;
    });
    await app.login("tok");
    const requestsAfterLogin = calls.length;
    (app as unknown as { form: ReturnType<typeof defaultForm> }).form = {
      ...defaultForm(),
      timeFrom: "23:00:00",
      timeTo: "11:00:00",
    };
    await app.runSphereQuery();
    expect(calls.length).toBe(requestsAfterLogin); // nothing left the page
    const error = container.querySelector<HTMLElement>(".form-error")!;
    expect(error.style.display).toBe("block");
    expect(error.textContent).toContain("start time");
  });

  it("renders API errors as a banner, never partial data", async () => {
    const { app } = appWithFetch((url) => {
      if (url.includes("/auth/whoami")) {
        return jsonResponse({ role: "student", actor_id: "u1" });
      }
      if (url.includes("/viz/spheres")) {
        return jsonResponse({ detail: "boom" }, 500);
      }
      return null;
    });
    await app.login("tok");
    await app.runSphereQuery();
    const banner = container.querySelector<HTMLElement>(".error-banner")!;
    expect(banner.style.display).toBe("block");
    expect(banner.textContent).toContain("boom");
    expect(container.querySelectorAll("circle")).toHaveLength(0);
  });

  it("student login renders no admin screen", async () => {
    const { app } = appWithFetch((url) => {
      if (url.includes("/auth/whoami")) {
        return jsonResponse({ role: "student", actor_id: "u1" });
      }
      if (url.includes("/viz/spheres")) return jsonResponse(TIMELINE);
      return null;
    });
    await app.login("tok");
    expect(app.isInstructor()).toBe(false);
    expect(container.querySelector(".admin-view")!.children).toHaveLength(0);
    await app.runSphereQuery();
    expect(container.querySelectorAll("circle")).toHaveLength(3);
  });

  it("instructor login loads the admin vocabulary screen", async () => {
    const { app } = appWithFetch((url) => {
      if (url.includes("/auth/whoami")) {
        return jsonResponse({ role: "instructor", actor_id: null });
      }
      if (url.includes("/admin/activities")) {
        return jsonResponse({
          version: 1,
          model: {
            activities: [{ name: "DisplayMessage", observables: [] }],
            rules: [],
            initial: [],
          },
        });
      }
      return null;
    });
    await app.login("tok");
    expect(app.isInstructor()).toBe(true);
    const admin = container.querySelector(".admin-view")!;
    expect(admin.textContent).toContain("DisplayMessage");
    expect(admin.textContent).toContain("version 1");
  });

  it("discards stale responses from superseded queries", async () => {
    let release: (() => void) | null = null;
    const slowTimeline = new Promise<Response>((resolve) => {
      release = () => resolve(jsonResponse(TIMELINE));
    });
    let sphereCalls = 0;
    const fetchFn = (async (input: RequestInfo | URL) => {
      const url = String(input);
      if (url.includes("/auth/whoami")) {
        return jsonResponse({ role: "student", actor_id: "u1" });
      }
      if (url.includes("/viz/spheres")) {
        sphereCalls += 1;
        if (sphereCalls === 1) return slowTimeline; // first query hangs
        return jsonResponse({ ...TIMELINE, spheres: [] });
      }
      return jsonResponse({ detail: "nope" }, 404);
    }) as typeof fetch;
    const app = new DashboardApp(container, { baseUrl: "http://svc.test", fetchFn });
    await app.login("tok");
    const first = app.runSphereQuery();
    await app.runSphereQuery(); // second query wins
    release!();
    await first;
    expect(container.querySelectorAll("circle")).toHaveLength(0);
    expect(container.textContent).toContain("no readings");
  });
});
