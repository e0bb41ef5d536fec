from fairfrontier.main import main

main()
