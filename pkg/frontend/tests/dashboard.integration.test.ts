/** Dashboard acceptance against a seeded server.
 *
 * The rendered timeline's circle count, colors, and offsets must equal
 * the API document; hover shows the brief tooltip and click opens the
 * detail with the state's events; a student token never reaches the
 * admin surface.
 */

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/dashboard/api";
import { DashboardApp } from "../src/dashboard/app";
import type { SphereTimelineDoc } from "../src/shared/wire";
import {
  INSTRUCTOR_TOKEN,
  STUDENT_TOKEN,
  startServer,
  type TestServer,
} from "./helpers/server";

let server: TestServer;

beforeAll(async () => {
  server = await startServer({ seed: true });
});

afterAll(async () => {
  await server.stop();
});

const sleep = (ms: number) => new Promise((resolve) => setTimeout(resolve, ms));

function mountApp(): { app: DashboardApp; container: HTMLElement } {
  document.body.innerHTML = "<div id='app'></div>";
  const container = document.getElementById("app")!;
  const app = new DashboardApp(container, { baseUrl: server.baseUrl });
  return { app, container };
}

describe("seeded timeline fidelity", () => {
  it("renders exactly what the API returns for the canonical query", async () => {
    const { app, container } = mountApp();
    await app.login(INSTRUCTOR_TOKEN);
    expect(app.isInstructor()).toBe(true);
    await app.runSphereQuery(); // default form = message 25, 2006-05-31 window

    const api = new ApiClient(server.baseUrl, INSTRUCTOR_TOKEN);
    const doc: SphereTimelineDoc = await api.sphereTimeline({
      message_id: "25",
      from_ms: 1_149_073_971_000,
      to_ms: 1_149_117_764_000,
      scale_k: 0.0005,
      scale_t: 1 / 60_000,
    });
    expect(doc.spheres.length).toBe(4); // the four seeded actors read message 25

    const circles = Array.from(container.querySelectorAll("circle"));
    expect(circles).toHaveLength(doc.spheres.length);
    circles.forEach((circle, index) => {
      const sphere = doc.spheres[index];
      expect(circle.getAttribute("data-actor")).toBe(sphere.reading.actor_id);
      expect(circle.getAttribute("fill")).toBe(sphere.reading.completeness);
      expect(Number(circle.getAttribute("data-offset"))).toBe(sphere.offset);
      expect(Number(circle.getAttribute("data-diameter"))).toBe(sphere.diameter);
      expect(Number(circle.getAttribute("cx"))).toBe(40 + sphere.offset);
    });
    const colors = circles.map((c) => c.getAttribute("fill"));
    expect(colors).toEqual(["green", "orange", "blue", "green"]);
  });

  it("hover shows the brief tooltip; click opens the event detail", async () => {
    const { app, container } = mountApp();
    await app.login(INSTRUCTOR_TOKEN);
    await app.runSphereQuery();

    const green = container.querySelector('circle[data-color="green"]')!;
    green.dispatchEvent(new MouseEvent("mouseover", { bubbles: true }));
    const tooltip = container.querySelector<HTMLElement>(".timeline-tooltip")!;
    expect(tooltip.style.display).toBe("block");
    expect(tooltip.textContent).toContain("read to end");

    green.dispatchEvent(new MouseEvent("click", { bubbles: true }));
    const detail = container.querySelector<HTMLElement>(".detail-panel")!;
    const settled = () =>
      detail.querySelector(".detail-events li") !== null;
    for (let i = 0; i < 150 && !settled(); i += 1) {
      await sleep(100);
    }
    expect(detail.style.display).toBe("block");
    expect(detail.textContent).toContain("Reading by");
    expect(detail.textContent).toContain("scroll on page");

    // a new query supersedes the selection
    await app.runSphereQuery();
    expect(detail.style.display).toBe("none");
  });

  it("participation and lurker views agree with the seeded cohort", async () => {
    const { app, container } = mountApp();
    await app.login(INSTRUCTOR_TOKEN);
    await app.runSphereQuery();
    const rows = Array.from(
      container.querySelectorAll(".participation-view tr[data-actor]"),
    );
    expect(rows).toHaveLength(4);
    const lurkerColumn = new Map(
      rows.map((row) => [
        row.getAttribute("data-actor"),
        row.querySelectorAll("td")[3]?.textContent,
      ]),
    );
    expect(lurkerColumn.get("u2")).toBe("yes");
    expect(lurkerColumn.get("u4")).toBe("yes");
    expect(lurkerColumn.get("u1")).toBe("no");
    expect(lurkerColumn.get("u3")).toBe("no");
  });
});

describe("role gating", () => {
  it("student sees no admin screen and the server refuses admin calls", async () => {
    const { app, container } = mountApp();
    await app.login(STUDENT_TOKEN);
    expect(app.isInstructor()).toBe(false);
    expect(container.querySelector(".admin-view")!.children).toHaveLength(0);

    const api = new ApiClient(server.baseUrl, STUDENT_TOKEN);
    await expect(api.model()).rejects.toThrowError(ApiError);
    await expect(api.model()).rejects.toMatchObject({ status: 403 });
    await expect(api.lurkers(0, 9_999_999_999_999)).rejects.toMatchObject({
      status: 403,
    });
  });

  it("instructor admin screen lists and mutates the vocabulary", async () => {
    const { app, container } = mountApp();
    await app.login(INSTRUCTOR_TOKEN);
    const admin = container.querySelector<HTMLElement>(".admin-view")!;
    expect(admin.textContent).toContain("DisplayMessage");

    (admin.querySelector(".admin-name") as HTMLInputElement).value = "DisplayAttachment";
    (admin.querySelector(".admin-object") as HTMLInputElement).value = "attachment_pane";
    (admin.querySelector(".admin-add-button") as HTMLButtonElement).click();
    for (let i = 0; i < 50 && !admin.textContent?.includes("DisplayAttachment"); i += 1) {
      await sleep(100);
    }
    expect(admin.textContent).toContain("DisplayAttachment");

    // deleting an in-use activity surfaces the server's error verbatim
    const row = admin.querySelector('li[data-activity="DisplayMessage"]')!;
    (row.querySelector("button") as HTMLButtonElement).click();
    for (let i = 0; i < 50 && !admin.querySelector(".toast"); i += 1) {
      await sleep(100);
    }
    expect(admin.querySelector(".toast")?.textContent).toMatch(/referenced|in use|appears/i);
  });
});
