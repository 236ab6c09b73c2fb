from asyscd.cli import main

raise SystemExit(main())
