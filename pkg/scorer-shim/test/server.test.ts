import { afterAll, beforeAll, describe, expect, it } from "vitest";
import { Server } from "node:http";

import { StubModel, loadModel, unitHash } from "../src/model.js";
import { createScoreServer } from "../src/server.js";

let server: Server;
let base: string;

function listen(s: Server): Promise<string> {
  return new Promise((resolve) => {
    s.listen(0, "127.0.0.1", () => {
      const address = s.address();
      if (typeof address === "object" && address) {
        resolve(`http://127.0.0.1:${address.port}`);
      }
    });
  });
}

async function post(url: string, body: unknown, raw = false) {
  const resp = await fetch(`${url}/v1/score`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: raw ? (body as string) : JSON.stringify(body),
  });
  return { status: resp.status, payload: await resp.json() };
}

beforeAll(async () => {
  server = createScoreServer({ ormModel: new StubModel(), prmModel: new StubModel() });
  base = await listen(server);
});

afterAll(() => {
  server.close();
});

describe("healthz", () => {
  it("reports ok once ready", async () => {
    const resp = await fetch(`${base}/healthz`);
    expect(resp.status).toBe(200);
    expect(await resp.json()).toEqual({ status: "ok" });
  });

  it("reports loading during warmup", async () => {
    const warming = createScoreServer({
      ormModel: new StubModel(),
      prmModel: new StubModel(),
      warmupMs: 60_000,
    });
    const url = await listen(warming);
    const health = await fetch(`${url}/healthz`);
    expect(health.status).toBe(503);
    const scored = await post(url, { mode: "outcome", question: "q", steps: ["a"] });
    expect(scored.status).toBe(503);
    expect(scored.payload.error).toMatch(/loading/);
    warming.close();
  });
});

describe("outcome mode", () => {
  it("returns a single score in range", async () => {
    const { status, payload } = await post(base, {
      mode: "outcome",
      question: "q",
      steps: ["Step 1: compute. #### 4"],
    });
    expect(status).toBe(200);
    expect(Object.keys(payload)).toEqual(["score"]);
    expect(payload.score).toBeGreaterThanOrEqual(0);
    expect(payload.score).toBeLessThanOrEqual(1);
  });

  it("clamps raw adapter output above one", async () => {
    const { payload } = await post(base, {
      mode: "outcome",
      question: "q",
      steps: ["[raw-high] anything"],
    });
    expect(payload.score).toBe(1);
  });
});

describe("process mode", () => {
  it("returns one score per step", async () => {
    const steps = ["Step 1: a", "Step 2: b", "Step 3: c"];
    const { status, payload } = await post(base, { mode: "process", question: "q", steps });
    expect(status).toBe(200);
    expect(payload.step_scores).toHaveLength(steps.length);
    for (const s of payload.step_scores) {
      expect(s).toBeGreaterThanOrEqual(0);
      expect(s).toBeLessThanOrEqual(1);
    }
  });

  it("clamps raw adapter output below zero", async () => {
    const { payload } = await post(base, {
      mode: "process",
      question: "q",
      steps: ["[raw-low] a", "clean b"],
    });
    expect(payload.step_scores[0]).toBe(0);
  });

  it("scores marked bad steps below clean ones", async () => {
    const { payload } = await post(base, {
      mode: "process",
      question: "q",
      steps: ["[bad] Step 1: slip", "Step 2: fine"],
    });
    expect(payload.step_scores[0]).toBeLessThan(payload.step_scores[1]);
  });

  it("is deterministic for identical requests", async () => {
    const body = { mode: "process", question: "same", steps: ["x", "y"] };
    const first = await post(base, body);
    const second = await post(base, body);
    expect(first.payload).toEqual(second.payload);
  });
});

describe("malformed requests", () => {
  const cases: Array<[string, unknown]> = [
    ["missing mode", { question: "q", steps: ["a"] }],
    ["unknown mode", { mode: "ranking", question: "q", steps: ["a"] }],
    ["missing steps", { mode: "process", question: "q" }],
    ["empty steps", { mode: "process", question: "q", steps: [] }],
    ["steps not a list", { mode: "process", question: "q", steps: "nope" }],
    ["non-string steps", { mode: "process", question: "q", steps: [1, 2] }],
    ["missing question", { mode: "outcome", steps: ["a"] }],
  ];
  for (const [name, body] of cases) {
    it(`rejects ${name} with 400`, async () => {
      const { status, payload } = await post(base, body);
      expect(status).toBe(400);
      expect(payload.error).toBeTruthy();
    });
  }

  it("rejects invalid JSON with 400", async () => {
    const { status } = await post(base, "{broken", true);
    expect(status).toBe(400);
  });

  it("404s unknown routes", async () => {
    const resp = await fetch(`${base}/v2/score`, { method: "POST", body: "{}" });
    expect(resp.status).toBe(404);
  });

  it("405s non-POST on the scoring route", async () => {
    const resp = await fetch(`${base}/v1/score`);
    expect(resp.status).toBe(405);
  });
});

describe("retryable path", () => {
  it("responds 503 to the loading simulation hook", async () => {
    const { status } = await post(base, {
      mode: "outcome",
      question: "[simulate-loading]",
      steps: ["a"],
    });
    expect(status).toBe(503);
  });
});

describe("model registry", () => {
  it("loads the stub and rejects unknown ids", () => {
    expect(loadModel("stub")).toBeInstanceOf(StubModel);
    expect(() => loadModel("prm-7b-main")).toThrow(/no adapter/);
  });

  it("unit hash is stable", () => {
    expect(unitHash("abc")).toBe(unitHash("abc"));
    expect(unitHash("abc")).not.toBe(unitHash("abd"));
  });
});
