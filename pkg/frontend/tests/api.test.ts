import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";

function fakeFetch(
  handler: (url: string, init?: RequestInit) => Response | Promise<Response>,
): typeof fetch {
  return (async (input: RequestInfo | URL, init?: RequestInit) =>
    handler(String(input), init)) as typeof fetch;
}

describe("api client", () => {
  it("opens a session", async () => {
    const api = new ApiClient("http://gw", "tok", fakeFetch((url, init) => {
      expect(url).toBe("http://gw/sessions");
      expect(init?.method).toBe("POST");
      expect(JSON.parse(String(init?.body))).toEqual({
        course: "EXTC", stream: "B", trimester: "T",
      });
      return Response.json(
        { id: "SES0001", course: "EXTC", stream: "B", trimester: "T",
          opened_s: 1, closed_s: null, state: "open" },
        { status: 201 },
      );
    }));
    const session = await api.openSession("EXTC", "B", "T");
    expect(session.id).toBe("SES0001");
  });

  it("attaches to the existing session on 409", async () => {
    const api = new ApiClient("http://gw", "tok", fakeFetch(() =>
      Response.json(
        {
          error: "SessionAlreadyOpen",
          detail: "course already open",
          session: { id: "SES0042", course: "EXTC", stream: "B", trimester: "T",
                     opened_s: 5, closed_s: null, state: "open" },
        },
        { status: 409 },
      ),
    ));
    const session = await api.openSession("EXTC", "B", "T");
    expect(session.id).toBe("SES0042");
  });

  it("blocks empty names before any request is made", async () => {
    let called = false;
    const api = new ApiClient("http://gw", "tok", fakeFetch(() => {
      called = true;
      return Response.json({}, { status: 201 });
    }));
    await expect(
      api.registerStudent({ name: "   ", course: "C", stream: "S", trimester: "T", tag_id: "00000000AA" }),
    ).rejects.toThrow(/name/);
    expect(called).toBe(false);
  });

  it("surfaces TagAlreadyBound inline", async () => {
    const api = new ApiClient("http://gw", "tok", fakeFetch(() =>
      Response.json(
        { error: "TagAlreadyBound", detail: "tag 00000000AA already bound to S000001" },
        { status: 409 },
      ),
    ));
    try {
      await api.registerStudent({
        name: "New Kid", course: "C", stream: "S", trimester: "T", tag_id: "00000000AA",
      });
      expect.unreachable();
    } catch (err) {
      expect(err).toBeInstanceOf(ApiError);
      expect((err as ApiError).status).toBe(409);
      expect((err as ApiError).code).toBe("TagAlreadyBound");
    }
  });

  it("downloads the report bytes unmodified", async () => {
    const csv = 'name,tag_id\r\n"Rao, Asha",00000000AA\r\n';
    const api = new ApiClient("http://gw", "tok", fakeFetch((url) => {
      expect(url).toBe("http://gw/sessions/SES0001/report.csv");
      return new Response(csv, { status: 200, headers: { "content-type": "text/csv" } });
    }));
    const bytes = await api.downloadReport("SES0001");
    expect(new TextDecoder().decode(bytes)).toBe(csv);
  });

  it("propagates auth failures", async () => {
    const api = new ApiClient("http://gw", "bad", fakeFetch(() =>
      Response.json({ error: "Unauthorized", detail: "missing or invalid token" }, { status: 401 }),
    ));
    await expect(api.getSession("SES0001")).rejects.toMatchObject({ status: 401 });
  });
});
