import { describe, expect, it } from "vitest";

import type { CandidateBatch, Metrics, RankingPage, SessionView } from "../src/api.js";
import { lineChartSvg } from "../src/chart.js";
import { renderCandidates, renderMetrics, renderRanking, renderStatus } from "../src/render.js";
import { applyCandidates, applySession, initialState, select } from "../src/state.js";

const VIEW: SessionView = {
  session_id: "s-42",
  phase: "awaiting-labels",
  error: null,
  iteration: 2,
  max_iterations: 20,
  budget: 10,
  oracle_calls: 14,
  strategy: "hybrid",
  metric: "nm1",
  pending_count: 1,
  labeled_normal: 9,
  labeled_anomalous: 5,
  train_pool: 210,
  rows: 2000,
  has_truth: true,
};

const BATCH: CandidateBatch = {
  iteration: 2,
  tau: 3.25,
  candidates: [
    {
      id: "r01999",
      score: 7.123456,
      rank: 1,
      top_features: ["f7", "f13"],
      active_count: 11,
      neighbors: {
        normal: { id: "r00003", similarity: 0.41 },
        anomaly: { id: "r00777", similarity: 0.875 },
      },
    },
  ],
};

describe("status panel", () => {
  it("shows phase, budget use, and labeled counts verbatim", () => {
    const html = renderStatus(VIEW, null);
    expect(html).toContain("awaiting-labels");
    expect(html).toContain("2 of 20");
    expect(html).toContain("14 used (10/iteration)");
    expect(html).toContain("9 normal, 5 anomalous");
    expect(html).toContain("210 of 2000 rows");
  });

  it("escapes error text", () => {
    const html = renderStatus(VIEW, "<script>alert(1)</script>");
    expect(html).not.toContain("<script>alert");
    expect(html).toContain("&lt;script&gt;");
  });
});

describe("candidate cards", () => {
  it("renders server values without recomputation", () => {
    let s = applySession(initialState(), VIEW);
    s = applyCandidates(s, BATCH);
    const html = renderCandidates(s);
    expect(html).toContain("r01999");
    expect(html).toContain("7.1235"); // score, 4 decimals
    expect(html).toContain("#1");
    expect(html).toContain("f7");
    expect(html).toContain("r00777");
    expect(html).toContain("0.875");
    expect(html).toContain("tau = 3.2500");
  });

  it("marks the chosen label and counts the submit button", () => {
    let s = applySession(initialState(), VIEW);
    s = applyCandidates(s, BATCH);
    s = select(s, "r01999", "anomaly");
    const html = renderCandidates(s);
    expect(html).toMatch(/label-anomaly chosen/);
    expect(html).toContain("submit 1 of 1 label(s)");
  });

  it("disables controls when the session is complete", () => {
    let s = applySession(initialState(), { ...VIEW, phase: "complete" });
    const html = renderCandidates(s);
    expect(html).toContain("No pending queries");
    expect(html).toContain("complete");
  });
});

describe("metrics panel", () => {
  const metrics: Metrics = {
    strategy: "hybrid",
    series: [
      { iteration: 0, ndcg: 0.6944, tau: null, queried: 0, expanded: 0, prioritized: 0 },
      { iteration: 1, ndcg: 0.8235, tau: 5.99, queried: 10, expanded: 120, prioritized: 4 },
    ],
    summary: { max: 0.8235, mean: 0.759, median: 0.6944 },
  };

  it("renders the chart and the exact series values", () => {
    const html = renderMetrics(metrics);
    expect(html).toContain("<svg");
    expect(html).toContain("0.6944");
    expect(html).toContain("0.8235");
    expect(html).toContain("median 0.6944");
  });

  it("degrades gracefully without ground truth", () => {
    const html = renderMetrics({
      strategy: "hybrid",
      series: [{ iteration: 0, ndcg: null, tau: null, queried: 0, expanded: 0, prioritized: 0 }],
      summary: null,
    });
    expect(html).toContain("quality series unavailable");
  });
});

describe("ranking table", () => {
  const page: RankingPage = {
    total: 2000,
    offset: 25,
    items: [
      { rank: 26, id: "r00007", score: 4.2, oracle_label: "anomaly", in_train_pool: false },
      { rank: 27, id: "r00010", score: 4.1, oracle_label: null, in_train_pool: true },
    ],
  };

  it("pages and tags rows", () => {
    const html = renderRanking(page);
    expect(html).toContain("26&ndash;27 of 2000");
    expect(html).toContain("tag-anomaly");
    expect(html).toContain("tag-pool");
  });
});

describe("chart", () => {
  it("draws one dot per point and scales into the viewbox", () => {
    const svg = lineChartSvg([
      { x: 0, y: 0.5 },
      { x: 1, y: 1.0 },
    ]);
    expect(svg.match(/<circle/g)).toHaveLength(2);
    expect(svg).toContain("<path");
    expect(svg).toContain("iteration 1: 1.0000");
  });

  it("handles an empty series", () => {
    expect(lineChartSvg([])).toContain("no data yet");
  });
});
