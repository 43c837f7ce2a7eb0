/** Query form state: message id, date, hh:mm:ss bounds, scale controls.
 *
 * Times are entered at the second granularity of the canonical query
 * ("message 25 between 11:12:51 and 23:22:44") and converted to epoch ms
 * in the server's timezone, configured as a fixed UTC offset.
 */

export interface QueryFormState {
  messageId: string;
  date: string; // yyyy-mm-dd
  timeFrom: string; // hh:mm:ss
  timeTo: string; // hh:mm:ss
  scaleK: number; // display units per ms
  scaleT: number; // display units per ms
}

export interface FormWindow {
  from_ms: number;
  to_ms: number;
}

const TIME_PATTERN = /^(\d{2}):(\d{2}):(\d{2})$/;
const DATE_PATTERN = /^(\d{4})-(\d{2})-(\d{2})$/;

function parseTimeSeconds(value: string): number | null {
  const match = TIME_PATTERN.exec(value);
  if (!match) return null;
  const [, h, m, s] = match;
  const hours = Number(h);
  const minutes = Number(m);
  const seconds = Number(s);
  if (hours > 23 || minutes > 59 || seconds > 59) return null;
  return hours * 3600 + minutes * 60 + seconds;
}

/**
 * Validate a form and compute its epoch window, or return an error
 * message. serverUtcOffsetMinutes positions the entered wall time in the
 * server's timezone (0 = UTC).
 */
export function formWindow(
  form: QueryFormState,
  serverUtcOffsetMinutes = 0,
): { window: FormWindow; error: null } | { window: null; error: string } {
  const dateMatch = DATE_PATTERN.exec(form.date);
  if (!dateMatch) {
    return { window: null, error: "date must be yyyy-mm-dd" };
  }
  const fromSeconds = parseTimeSeconds(form.timeFrom);
  const toSeconds = parseTimeSeconds(form.timeTo);
  if (fromSeconds === null || toSeconds === null) {
    return { window: null, error: "times must be hh:mm:ss" };
  }
  if (fromSeconds > toSeconds) {
    return { window: null, error: "start time must not be after end time" };
  }
  if (form.scaleK <= 0 || form.scaleT <= 0) {
    return { window: null, error: "scales must be positive" };
  }
  const [, year, month, day] = dateMatch;
  const midnightUtc = Date.UTC(Number(year), Number(month) - 1, Number(day));
  const offsetMs = serverUtcOffsetMinutes * 60_000;
  return {
    window: {
      from_ms: midnightUtc + fromSeconds * 1000 - offsetMs,
      to_ms: midnightUtc + toSeconds * 1000 - offsetMs,
    },
    error: null,
  };
}

/** The canonical demo query: message 25 on 2006-05-31, 11:12:51..23:22:44. */
export function defaultForm(): QueryFormState {
  return {
    messageId: "25",
    date: "2006-05-31",
    timeFrom: "11:12:51",
    timeTo: "23:22:44",
    scaleK: 0.0005,
    scaleT: 1 / 60_000,
  };
}
