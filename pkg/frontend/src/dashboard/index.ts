/** Browser entry: mounts the dashboard on #app using page-level config. */

import { mount } from "./app";
import type { DashboardConfig } from "./app";

declare global {
  interface Window {
    FORUMTRACE_DASHBOARD_CONFIG?: DashboardConfig;
  }
}

const container = document.getElementById("app");
if (container) {
  const config = window.FORUMTRACE_DASHBOARD_CONFIG ?? { baseUrl: window.location.origin };
  mount(container, config);
}

export { mount };
export type { DashboardConfig };
