/**
 * The scoring wire protocol server.
 *
 * POST /v1/score
 *   body:     {"mode": "outcome" | "process", "question": string, "steps": [string, ...]}
 *   response: {"score": number} for outcome, {"step_scores": [number, ...]} for process
 *             (always exactly one score per submitted step)
 *   status:   200 on success, 400 on a malformed body, 503 while a model is
 *             still loading (retryable)
 *
 * GET /healthz -> 200 {"status": "ok"} once ready, 503 {"status": "loading"}
 * during warmup.
 *
 * Outcome requests may carry the solution as one segment or several; the
 * segments are joined with newlines before scoring. All scores are clamped
 * to [0, 1] before serialization.
 */

import { createServer as createHttpServer, IncomingMessage, Server, ServerResponse } from "node:http";

import { ScoringModel } from "./model.js";

export interface ShimOptions {
  ormModel: ScoringModel;
  prmModel: ScoringModel;
  /** Scoring requests fail with 503 until this many ms after start. */
  warmupMs?: number;
  /** Maximum accepted request body, in bytes. */
  maxBodyBytes?: number;
}

interface ScoreRequest {
  mode: "outcome" | "process";
  question: string;
  steps: string[];
}

function clamp(value: number): number {
  if (!Number.isFinite(value)) return 0;
  return Math.min(1, Math.max(0, value));
}

function parseScoreRequest(body: unknown): ScoreRequest | string {
  if (typeof body !== "object" || body === null || Array.isArray(body)) {
    return "body must be a JSON object";
  }
  const record = body as Record<string, unknown>;
  const { mode, question, steps } = record;
  if (mode !== "outcome" && mode !== "process") {
    return 'field "mode" must be "outcome" or "process"';
  }
  if (typeof question !== "string") {
    return 'field "question" must be a string';
  }
  if (!Array.isArray(steps) || steps.length === 0) {
    return 'field "steps" must be a non-empty array';
  }
  if (!steps.every((s) => typeof s === "string")) {
    return 'field "steps" must contain strings only';
  }
  return { mode, question, steps: steps as string[] };
}

function readBody(req: IncomingMessage, limit: number): Promise<string> {
  return new Promise((resolve, reject) => {
    const chunks: Buffer[] = [];
    let size = 0;
    req.on("data", (chunk: Buffer) => {
      size += chunk.length;
      if (size > limit) {
        reject(new Error("body too large"));
        req.destroy();
        return;
      }
      chunks.push(chunk);
    });
    req.on("end", () => resolve(Buffer.concat(chunks).toString("utf8")));
    req.on("error", reject);
  });
}

function sendJson(res: ServerResponse, status: number, payload: unknown): void {
  const body = JSON.stringify(payload);
  res.writeHead(status, {
    "Content-Type": "application/json",
    "Content-Length": Buffer.byteLength(body),
  });
  res.end(body);
}

export function createScoreServer(options: ShimOptions): Server {
  const startedAt = Date.now();
  const warmupMs = options.warmupMs ?? 0;
  const maxBody = options.maxBodyBytes ?? 1_000_000;
  const ready = () => Date.now() - startedAt >= warmupMs;

  return createHttpServer(async (req, res) => {
    try {
      if (req.method === "GET" && req.url === "/healthz") {
        if (!ready()) {
          sendJson(res, 503, { status: "loading" });
          return;
        }
        sendJson(res, 200, { status: "ok" });
        return;
      }
      if (req.url !== "/v1/score") {
        sendJson(res, 404, { error: "not found" });
        return;
      }
      if (req.method !== "POST") {
        sendJson(res, 405, { error: "use POST" });
        return;
      }
      if (!ready()) {
        sendJson(res, 503, { error: "model loading, retry later" });
        return;
      }

      let parsedBody: unknown;
      try {
        parsedBody = JSON.parse(await readBody(req, maxBody));
      } catch {
        sendJson(res, 400, { error: "body is not valid JSON" });
        return;
      }
      const request = parseScoreRequest(parsedBody);
      if (typeof request === "string") {
        sendJson(res, 400, { error: request });
        return;
      }

      // stub hook used by contract tests to exercise the retryable path
      if (request.question.includes("[simulate-loading]")) {
        sendJson(res, 503, { error: "model loading, retry later" });
        return;
      }

      if (request.mode === "outcome") {
        const solution = request.steps.join("\n");
        const score = clamp(options.ormModel.outcome(request.question, solution));
        sendJson(res, 200, { score });
        return;
      }

      const raw = options.prmModel.process(request.question, request.steps);
      if (raw.length !== request.steps.length) {
        // an adapter bug must never surface as a mismatched response
        sendJson(res, 500, {
          error: `adapter returned ${raw.length} scores for ${request.steps.length} steps`,
        });
        return;
      }
      sendJson(res, 200, { step_scores: raw.map(clamp) });
    } catch (err) {
      sendJson(res, 500, { error: `internal error: ${String(err)}` });
    }
  });
}
