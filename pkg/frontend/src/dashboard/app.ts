/** Dashboard application: login, query form, timeline, participation and
 * lurker views, and the instructor-only admin screen.
 *
 * One query may be in flight per view; every request carries a token and
 * responses for superseded tokens are discarded, so a stale answer can
 * never overwrite a newer one (it also dismisses nothing).
 */

import { ApiClient, ApiError, type WhoAmI } from "./api";
import { defaultForm, formWindow, type QueryFormState } from "./form";
import { renderTimeline } from "./timeline";
import {
  renderAdmin,
  renderParticipation,
  renderSphereDetail,
  showToast,
} from "./views";

export interface DashboardConfig {
  baseUrl: string;
  /** Fixed UTC offset of the server's timezone, in minutes. */
  serverUtcOffsetMinutes?: number;
  fetchFn?: typeof fetch;
}

export class DashboardApp {
  readonly root: HTMLElement;
  private api: ApiClient | null = null;
  private identity: WhoAmI | null = null;
  private form: QueryFormState = defaultForm();
  private queryToken = 0;
  private lastWindow: { from_ms: number; to_ms: number } | null = null;

  private readonly elements: {
    login: HTMLElement;
    error: HTMLElement;
    controls: HTMLElement;
    timeline: HTMLElement;
    detail: HTMLElement;
    participation: HTMLElement;
    admin: HTMLElement;
  };

  constructor(
    container: HTMLElement,
    private readonly config: DashboardConfig,
  ) {
    this.root = container;
    const doc = container.ownerDocument;
    const section = (className: string) => {
      const node = doc.createElement("section");
      node.className = className;
      container.appendChild(node);
      return node;
    };
    this.elements = {
      login: section("login"),
      error: section("error-banner"),
      controls: section("controls"),
      timeline: section("timeline-view"),
      detail: section("detail-panel"),
      participation: section("participation-view"),
      admin: section("admin-view"),
    };
    this.elements.error.style.display = "none";
    this.elements.detail.style.display = "none";
    this.renderLogin();
  }

  // --- login ---------------------------------------------------------------

  private renderLogin(): void {
    const doc = this.root.ownerDocument;
    const input = doc.createElement("input");
    input.type = "password";
    input.placeholder = "access token";
    input.className = "token-input";
    const button = doc.createElement("button");
    button.textContent = "sign in";
    button.className = "login-button";
    button.addEventListener("click", () => void this.login(input.value));
    this.elements.login.append(input, button);
  }

  async login(token: string): Promise<void> {
    const api = new ApiClient(this.config.baseUrl, token, this.config.fetchFn ?? fetch);
    try {
      this.identity = await api.whoami();
    } catch (error) {
      this.identity = null;
      this.api = null;
      this.showError(error);
      return;
    }
    this.api = api;
    this.clearError();
    this.renderControls();
    if (this.isInstructor()) {
      await this.refreshAdmin();
    } else {
      this.elements.admin.replaceChildren();
    }
  }

  isInstructor(): boolean {
    return this.identity?.role === "instructor";
  }

  // --- query form ------------------------------------------------------------

  private renderControls(): void {
    const doc = this.root.ownerDocument;
    const controls = this.elements.controls;
    controls.replaceChildren();

    const field = (name: keyof QueryFormState, label: string, type = "text") => {
      const wrap = doc.createElement("label");
      wrap.textContent = label;
      const input = doc.createElement("input");
      input.type = type;
      input.className = `field-${name}`;
      input.value = String(this.form[name]);
      input.addEventListener("input", () => {
        const value = input.value;
        if (name === "scaleK" || name === "scaleT") {
          this.form = { ...this.form, [name]: Number(value) };
        } else {
          this.form = { ...this.form, [name]: value };
        }
      });
      wrap.appendChild(input);
      controls.appendChild(wrap);
      return input;
    };

    field("messageId", "message id");
    field("date", "date");
    field("timeFrom", "from");
    field("timeTo", "to");
    field("scaleK", "diameter scale (units/ms)");
    field("scaleT", "distance scale (units/ms)");

    const validation = doc.createElement("p");
    validation.className = "form-error";
    validation.style.display = "none";
    controls.appendChild(validation);

    const run = doc.createElement("button");
    run.textContent = "visualize";
    run.className = "run-query";
    run.addEventListener("click", () => void this.runSphereQuery());
    controls.appendChild(run);
  }

  formError(message: string | null): void {
    const node = this.root.querySelector<HTMLElement>(".form-error");
    if (!node) return;
    if (message === null) {
      node.style.display = "none";
      node.textContent = "";
    } else {
      node.style.display = "block";
      node.textContent = message;
    }
  }

  // --- queries ----------------------------------------------------------------

  async runSphereQuery(): Promise<void> {
    if (!this.api) return;
    const outcome = formWindow(this.form, this.config.serverUtcOffsetMinutes ?? 0);
    if (outcome.error !== null) {
      this.formError(outcome.error); // invalid form: no request leaves the page
      return;
    }
    this.formError(null);
    const window = outcome.window;
    this.lastWindow = window;
    const token = ++this.queryToken;

    // a new query supersedes any selection or tooltip from the old one
    this.elements.detail.style.display = "none";
    this.elements.detail.replaceChildren();

    try {
      const timeline = await this.api.sphereTimeline({
        message_id: this.form.messageId || undefined,
        from_ms: window.from_ms,
        to_ms: window.to_ms,
        scale_k: this.form.scaleK,
        scale_t: this.form.scaleT,
      });
      if (token !== this.queryToken) return; // superseded
      this.clearError();
      renderTimeline(this.elements.timeline, timeline, {
        onSelect: (sphere) => {
          if (!this.api || !this.lastWindow) return;
          void renderSphereDetail(this.elements.detail, this.api, sphere, this.lastWindow);
        },
      });
      await this.refreshParticipation(window, token);
    } catch (error) {
      if (token !== this.queryToken) return;
      this.showError(error); // never render partial data silently
    }
  }

  private async refreshParticipation(
    window: { from_ms: number; to_ms: number },
    token: number,
  ): Promise<void> {
    if (!this.api || !this.isInstructor()) {
      this.elements.participation.replaceChildren();
      return;
    }
    const [summaries, lurkers] = await Promise.all([
      this.api.participation(window.from_ms, window.to_ms),
      this.api.lurkers(window.from_ms, window.to_ms),
    ]);
    if (token !== this.queryToken) return;
    renderParticipation(this.elements.participation, summaries, lurkers);
  }

  async refreshAdmin(): Promise<void> {
    if (!this.api || !this.isInstructor()) return;
    try {
      const model = await this.api.model();
      renderAdmin(this.elements.admin, this.api, model, () => void this.refreshAdmin());
    } catch (error) {
      showToast(this.elements.admin, error);
    }
  }

  // --- errors -----------------------------------------------------------------

  private showError(error: unknown): void {
    const banner = this.elements.error;
    banner.style.display = "block";
    banner.textContent =
      error instanceof ApiError
        ? `request failed (${error.status}): ${error.message}`
        : `request failed: ${String(error)}`;
  }

  private clearError(): void {
    this.elements.error.style.display = "none";
    this.elements.error.textContent = "";
  }
}

export function mount(container: HTMLElement, config: DashboardConfig): DashboardApp {
  return new DashboardApp(container, config);
}
