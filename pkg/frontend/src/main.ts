import { joinService, StudentApp, TAApp, type JoinInfo } from "./app.js";

const root = document.getElementById("app")!;

function showJoinForm(error = ""): void {
  root.innerHTML = `
    <div class="join-card">
      <h1>Group Tutoring</h1>
      <p>Sign in with your school email and your group number.</p>
      ${error ? `<p class="error">${error}</p>` : ""}
      <form id="join-form">
        <label>Email <input id="join-email" type="email" required autocomplete="email"></label>
        <label>Group number <input id="join-group" type="number" min="0" value="1" required></label>
        <button>Join</button>
      </form>
      <p class="muted">TAs: enter group 0 for the monitoring console.</p>
    </div>`;
  document.getElementById("join-form")!.addEventListener("submit", async (ev) => {
    ev.preventDefault();
    const email = (document.getElementById("join-email") as HTMLInputElement).value;
    const group = Number((document.getElementById("join-group") as HTMLInputElement).value);
    try {
      const info = await joinService(email, group);
      sessionStorage.setItem("join", JSON.stringify(info));
      start(info);
    } catch (e) {
      showJoinForm(e instanceof Error ? e.message : "join failed");
    }
  });
}

function start(info: JoinInfo): void {
  root.innerHTML = "";
  if (info.role === "ta") new TAApp(root, info);
  else new StudentApp(root, info);
}

const saved = sessionStorage.getItem("join");
if (saved) {
  try {
    start(JSON.parse(saved) as JoinInfo);
  } catch {
    showJoinForm();
  }
} else {
  showJoinForm();
}
